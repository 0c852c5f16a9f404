#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hbvsde::cli {

/// %.17g; the only float format used in emitted text.
std::string fmt17(double v);

/// Column-oriented CSV: header row, then one row per index, '\n' line endings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    void add(std::string name, std::vector<double> values);
    std::string str() const;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

/// Reads a numeric CSV with a header row.
CsvData read_csv(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct Panel {
    std::string title;
    std::string xlabel;
    std::vector<Series> series;
};

/// Stacked line-chart panels as a standalone SVG document. Output depends only on the data.
std::string svg_chart(const std::string& title, const std::vector<Panel>& panels);

/// Collects the files of one run; every write is recorded with its digest.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir);

    void write(const std::string& name, const std::string& bytes);

    struct Entry {
        std::string name;
        std::string sha256;
        std::size_t bytes;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<Entry> entries_;
};

}  // namespace hbvsde::cli
