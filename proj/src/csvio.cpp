#include "stakesim/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stakesim/types.hpp"

namespace stakesim::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open csv file: " + path);
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv file (header required): " + path);
    table.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        table.rows.push_back(split_line(line));
    }
    return table;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write csv file: " + path);
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
}

void write_sidecar(const std::string& csv_path, std::uint64_t seed, const std::string& config_hash) {
    nlohmann::json meta;
    meta["tool_version"] = "stakesim 1.0.0";
    meta["seed"] = seed;
    meta["config_hash"] = config_hash;
    std::ofstream out(csv_path + ".meta.json", std::ios::binary);
    if (!out) throw ConfigError("cannot write sidecar for: " + csv_path);
    out << meta.dump(2) << '\n';
}

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return std::string(buf);
}

}  // namespace stakesim::csv
