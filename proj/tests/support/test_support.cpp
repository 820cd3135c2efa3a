#include "test_support.hpp"

#include <stdexcept>
#include <string>
#include <vector>

#include <stdlib.h>

namespace scotbench::testkit {

ScratchDir::ScratchDir(const std::string& tag) {
    auto pattern = (std::filesystem::temp_directory_path() / ("scotbench-" + tag + "-XXXXXX")).string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace scotbench::testkit
