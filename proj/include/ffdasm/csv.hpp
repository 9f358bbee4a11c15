#pragma once

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffdasm {

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) {
        os_.open(path, std::ios::trunc);
        if (!os_) throw std::runtime_error("cannot open for write: " + path);
        for (std::size_t i = 0; i < header.size(); ++i)
            os_ << (i ? "," : "") << header[i];
        os_ << '\n';
        os_.precision(17);
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            os_ << (i ? "," : "") << values[i];
        os_ << '\n';
    }

    void flush() { os_.flush(); }

private:
    std::ofstream os_;
};

}  // namespace ffdasm
