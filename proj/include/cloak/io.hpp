#pragma once

#include "cloak/types.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>

namespace cloak {

/// Line-oriented reader that remembers the current line number for error messages.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next line that is neither blank nor a '#' comment. Returns false at end of input.
    bool next(std::string& line);
    /// Like next() but throws ParseError at end of input.
    std::string expect(const std::string& what);
    int line() const { return line_; }

    [[noreturn]] void fail(const std::string& what) const;

private:
    std::istream& in_;
    int line_ = 0;
};

/// "matrix <name> <rows> <cols>" followed by one comma-separated line per row.
void write_matrix(std::ostream& out, const std::string& name, const Matrix& m);
Matrix read_matrix(LineReader& in, const std::string& name);

/// Ordered key = value store written as plain text, used for manifests.
class Manifest {
public:
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    void write(std::ostream& out) const;
    void save(const std::string& path) const;
    static Manifest read(std::istream& in);
    static Manifest load(const std::string& path);

private:
    std::map<std::string, std::string> entries_;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);

/// Hex form of a 64-bit digest.
std::string hex_digest(std::uint64_t h);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 1469598103934665603ull);

/// Creates the directory and its parents; throws std::runtime_error on failure.
void ensure_directory(const std::string& path);

}  // namespace cloak
