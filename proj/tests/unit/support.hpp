#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "irand/panel.hpp"

namespace irand::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("irand_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline VariableSchema tyx_schema() {
    VariableSchema s;
    s.treatment_column = "T";
    s.confounder_columns = {"X"};
    s.outcome_column = "Y";
    return s;
}

inline TwoPointPanel parse(const std::string& csv, const VariableSchema& schema) {
    std::istringstream in(csv);
    return parse_panel(in, schema);
}

}  // namespace irand::test
