#include "hbvsde_cli/output.hpp"

#include "hbvsde_cli/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hbvsde::cli {

std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvTable::add(std::string name, std::vector<double> values)
{
    if (!columns.empty() && values.size() != columns.front().size())
        throw std::logic_error("CsvTable: column '" + name + "' has a different length");
    header.push_back(std::move(name));
    columns.push_back(std::move(values));
}

std::string CsvTable::str() const
{
    std::string s;
    for (std::size_t c = 0; c < header.size(); ++c)
        s += (c ? "," : "") + header[c];
    s += '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c)
                s += ',';
            s += fmt17(columns[c][r]);
        }
        s += '\n';
    }
    return s;
}

CsvData read_csv(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot open input file '" + path.string() + "'");
    CsvData d;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ','))
            out.push_back(cell);
        return out;
    };
    if (!std::getline(f, line))
        throw ConfigError("input file '" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    d.header = split(line);
    d.columns.resize(d.header.size());
    for (std::size_t row = 2; std::getline(f, line); ++row) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != d.header.size())
            throw ConfigError("input row " + std::to_string(row) + ": expected " + std::to_string(d.header.size()) +
                              " fields");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            const auto* b = cells[c].data();
            const auto* e = b + cells[c].size();
            const auto [ptr, ec] = std::from_chars(b, e, v);
            if (ec != std::errc() || ptr != e)
                throw ConfigError("input row " + std::to_string(row) + ": '" + cells[c] + "' is not a number");
            d.columns[c].push_back(v);
        }
    }
    return d;
}

std::string sha256_hex(const std::string& bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"};
constexpr double kWidth = 760.0;
constexpr double kPanelHeight = 250.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 170.0;
constexpr double kTop = 28.0;
constexpr double kBottom = 42.0;
constexpr std::size_t kMaxPoints = 2000;

std::string coord(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = INFINITY;
    double hi = -INFINITY;

    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    void finish()
    {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        } else if (lo == hi) {
            const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
            lo -= pad;
            hi += pad;
        }
    }
};

void panel_svg(std::string& s, const Panel& p, double y0)
{
    Range xr, yr;
    for (const auto& ser : p.series)
        for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i)
            if (std::isfinite(ser.x[i]) && std::isfinite(ser.y[i])) {
                xr.add(ser.x[i]);
                yr.add(ser.y[i]);
            }
    xr.finish();
    yr.finish();

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kPanelHeight - kTop - kBottom;
    const double top = y0 + kTop;
    auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    s += "<text x=\"" + coord(kLeft) + "\" y=\"" + coord(y0 + 18) + "\" font-size=\"13\">" + escape(p.title) +
         "</text>\n";
    s += "<rect x=\"" + coord(kLeft) + "\" y=\"" + coord(top) + "\" width=\"" + coord(plot_w) + "\" height=\"" +
         coord(plot_h) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        s += "<line x1=\"" + coord(px(fx)) + "\" y1=\"" + coord(top) + "\" x2=\"" + coord(px(fx)) + "\" y2=\"" +
             coord(top + plot_h) + "\" stroke=\"#ddd\"/>\n";
        s += "<line x1=\"" + coord(kLeft) + "\" y1=\"" + coord(py(fy)) + "\" x2=\"" + coord(kLeft + plot_w) +
             "\" y2=\"" + coord(py(fy)) + "\" stroke=\"#ddd\"/>\n";
        s += "<text x=\"" + coord(px(fx)) + "\" y=\"" + coord(top + plot_h + 14) +
             "\" font-size=\"10\" text-anchor=\"middle\">" + label(fx) + "</text>\n";
        s += "<text x=\"" + coord(kLeft - 4) + "\" y=\"" + coord(py(fy) + 3) +
             "\" font-size=\"10\" text-anchor=\"end\">" + label(fy) + "</text>\n";
    }
    s += "<text x=\"" + coord(kLeft + plot_w / 2) + "\" y=\"" + coord(top + plot_h + 32) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + escape(p.xlabel) + "</text>\n";

    for (std::size_t si = 0; si < p.series.size(); ++si) {
        const auto& ser = p.series[si];
        const char* color = kPalette[si % kPalette.size()];
        const std::size_t n = std::min(ser.x.size(), ser.y.size());
        const std::size_t step = n > kMaxPoints ? (n + kMaxPoints - 1) / kMaxPoints : 1;
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\"" +
                     (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < n; i += step) {
            const std::size_t k = (i + step >= n) ? n - 1 : i;
            if (std::isfinite(ser.x[k]) && std::isfinite(ser.y[k])) {
                if (!pts.empty())
                    pts += ' ';
                pts += coord(px(ser.x[k])) + "," + coord(py(ser.y[k]));
            } else {
                flush();
            }
            if (k == n - 1)
                break;
        }
        flush();
        const double ly = top + 12 + 16 * static_cast<double>(si);
        const double lx = kLeft + plot_w + 12;
        s += "<line x1=\"" + coord(lx) + "\" y1=\"" + coord(ly) + "\" x2=\"" + coord(lx + 22) + "\" y2=\"" +
             coord(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
             (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
        s += "<text x=\"" + coord(lx + 28) + "\" y=\"" + coord(ly + 4) + "\" font-size=\"11\">" + escape(ser.label) +
             "</text>\n";
    }
}

}  // namespace

std::string svg_chart(const std::string& title, const std::vector<Panel>& panels)
{
    const double height = 30.0 + kPanelHeight * static_cast<double>(panels.size());
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(kWidth) + "\" height=\"" + coord(height) +
         "\" viewBox=\"0 0 " + coord(kWidth) + " " + coord(height) + "\" font-family=\"sans-serif\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + coord(kWidth / 2) + "\" y=\"20\" font-size=\"15\" text-anchor=\"middle\">" + escape(title) +
         "</text>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        panel_svg(s, panels[i], 30.0 + kPanelHeight * static_cast<double>(i));
    s += "</svg>\n";
    return s;
}

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void OutputDir::write(const std::string& name, const std::string& bytes)
{
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw std::runtime_error("write failed for '" + path.string() + "'");
    entries_.push_back({name, sha256_hex(bytes), bytes.size()});
}

}  // namespace hbvsde::cli
