#include "cloak/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cloak {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

bool LineReader::next(std::string& line) {
    std::string raw;
    while (std::getline(in_, raw)) {
        ++line_;
        line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        return true;
    }
    return false;
}

std::string LineReader::expect(const std::string& what) {
    std::string line;
    if (!next(line)) throw ParseError("unexpected end of input, expected " + what, line_);
    return line;
}

void LineReader::fail(const std::string& what) const { throw ParseError(what, line_); }

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw std::invalid_argument(what + ": '" + text + "' is not a number");
    return v;
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    std::string row;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) row += ',';
            row += format_double(m(i, j));
        }
        out << row << '\n';
    }
}

Matrix read_matrix(LineReader& in, const std::string& name) {
    std::istringstream head(in.expect("matrix " + name));
    std::string tag, got;
    long rows = -1, cols = -1;
    head >> tag >> got >> rows >> cols;
    if (tag != "matrix" || got != name || rows < 0 || cols < 0) in.fail("expected header 'matrix " + name + " <rows> <cols>'");
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        const std::string line = in.expect("row " + std::to_string(i) + " of " + name);
        const char* p = line.data();
        const char* end = p + line.size();
        for (long j = 0; j < cols; ++j) {
            const auto res = std::from_chars(p, end, m(i, j));
            if (res.ec != std::errc()) in.fail(name + ": bad value in column " + std::to_string(j));
            p = res.ptr;
            if (j + 1 < cols) {
                if (p == end || *p != ',') in.fail(name + ": expected " + std::to_string(cols) + " columns");
                ++p;
            }
        }
        if (p != end) in.fail(name + ": too many columns");
    }
    return m;
}

void Manifest::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void Manifest::set(const std::string& key, std::int64_t value) { entries_[key] = std::to_string(value); }

const std::string& Manifest::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("manifest: missing key '" + key + "'");
    return it->second;
}

double Manifest::get_double(const std::string& key) const { return parse_double(get(key), "manifest key " + key); }

std::int64_t Manifest::get_int(const std::string& key) const {
    const std::string& v = get(key);
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw std::runtime_error("manifest key " + key + ": '" + v + "' is not an integer");
    return out;
}

void Manifest::write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write(out);
    if (!out) throw std::runtime_error("write failed for " + path);
}

Manifest Manifest::read(std::istream& in) {
    Manifest m;
    LineReader r(in);
    std::string line;
    while (r.next(line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) r.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) r.fail("empty key");
        m.entries_[key] = trim(line.substr(eq + 1));
    }
    return m;
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read(in);
}

std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

}  // namespace cloak
