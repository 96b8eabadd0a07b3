#include "lot/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lot {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e;
}

void put_u32(std::ostream& o, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    o.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated binary plan header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

PointCloud parse_csv(std::istream& in, const std::string& name) {
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    bool header = false, has_label = false;
    std::size_t width = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split(line);
        double probe = 0.0;
        if (rows.empty() && !header && !parse_number(f.front(), probe)) {
            header = true;
            has_label = !f.empty() && f.back() == "label";
            width = f.size();
            continue;
        }
        if (width == 0) width = f.size();
        if (f.size() != width)
            throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                                        " columns, found " + std::to_string(f.size()));
        std::vector<double> row;
        const std::size_t ncoord = has_label ? width - 1 : width;
        for (std::size_t c = 0; c < ncoord; ++c) {
            double v = 0.0;
            if (!parse_number(f[c], v) || !std::isfinite(v))
                throw std::invalid_argument(name + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1) +
                                            ": invalid number '" + f[c] + "'");
            row.push_back(v);
        }
        if (has_label) {
            int l = 0;
            const std::string& s = f.back();
            auto r = std::from_chars(s.data(), s.data() + s.size(), l);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size())
                throw std::invalid_argument(name + ":" + std::to_string(lineno) + ":" + std::to_string(width) +
                                            ": invalid label '" + s + "'");
            labels.push_back(l);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(name + ": no data rows");
    const std::size_t d = rows.front().size();
    if (d == 0) throw std::invalid_argument(name + ": no coordinate columns");
    Matrix pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t a = 0; a < d; ++a) pts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)) = rows[i][a];
    if (has_label) return PointCloud(std::move(pts), std::move(labels));
    return PointCloud(std::move(pts));
}

PointCloud read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return parse_csv(in, path);
}

void write_csv(std::ostream& out, const PointCloud& cloud) {
    for (Eigen::Index a = 0; a < cloud.dim(); ++a) out << (a ? "," : "") << "x" << a;
    if (cloud.labels) out << ",label";
    out << "\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        for (Eigen::Index a = 0; a < cloud.dim(); ++a) out << (a ? "," : "") << format_double(cloud.points(a, i));
        if (cloud.labels) out << "," << (*cloud.labels)[static_cast<std::size_t>(i)];
        out << "\n";
    }
}

void write_csv(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv(out, cloud);
}

void write_matrix_binary(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("LOTP", 4);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    put_u32(out, 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
            out.write(reinterpret_cast<const char*>(b), 8);
        }
}

Matrix read_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LOTP", 4) != 0) throw std::runtime_error(path + ": bad magic");
    const std::uint32_t r = get_u32(in), c = get_u32(in);
    get_u32(in);
    Matrix m(r, c);
    for (std::uint32_t i = 0; i < r; ++i)
        for (std::uint32_t j = 0; j < c; ++j) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (!in) throw std::runtime_error(path + ": truncated data");
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            double v;
            std::memcpy(&v, &bits, 8);
            m(i, j) = v;
        }
    return m;
}

}  // namespace lot
