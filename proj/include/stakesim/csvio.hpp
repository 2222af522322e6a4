#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stakesim::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

// Reads a comma-separated file with a mandatory header row. Quoting is not
// supported; none of the schemas in this project need it.
Table read_file(const std::string& path);

void write_file(const std::string& path, const Table& table);

// Every emitted CSV gets a sidecar JSON describing how it was produced.
void write_sidecar(const std::string& csv_path, std::uint64_t seed, const std::string& config_hash);

std::string format_double(double v, int precision = 6);

}  // namespace stakesim::csv
