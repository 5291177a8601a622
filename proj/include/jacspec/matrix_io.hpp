#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"

namespace jacspec {

inline constexpr std::array<char, 8> kBinaryMatrixMagic = {'D', 'M', 'A', 'T', 'v', '0', '0', '1'};

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw IoError("not a decimal real: '" + std::string(text) + "'");
    }
    return v;
}

/// Text form: "dmat <rows> <cols>" then one line of space-separated reals per row.
inline void write_matrix_text(std::ostream& out, const DenseMatrix& m) {
    out << "dmat " << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << ' ';
            out << format_double(r[j]);
        }
        out << '\n';
    }
}

inline DenseMatrix read_matrix_text(std::istream& in) {
    std::string tag;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> rows >> cols) || tag != "dmat") {
        throw IoError("matrix text: expected header 'dmat <rows> <cols>'");
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    std::string line;
    std::getline(in, line);  // rest of header line
    for (std::size_t i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) {
            throw IoError("matrix text: expected " + std::to_string(rows) + " rows, got " +
                          std::to_string(i));
        }
        std::istringstream ls(line);
        std::string tok;
        std::size_t count = 0;
        while (ls >> tok) {
            values.push_back(parse_double(tok));
            ++count;
        }
        if (count != cols) {
            throw IoError("matrix text: row " + std::to_string(i) + " has " +
                          std::to_string(count) + " entries, expected " + std::to_string(cols));
        }
    }
    return DenseMatrix(rows, cols, std::move(values));
}

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw IoError("matrix binary: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

/// Binary form: magic "DMATv001", u64 rows, u64 cols, then IEEE-754 doubles,
/// all little-endian, row-major.
inline void write_matrix_binary(std::ostream& out, const DenseMatrix& m) {
    out.write(kBinaryMatrixMagic.data(), kBinaryMatrixMagic.size());
    detail::put_u64_le(out, m.rows());
    detail::put_u64_le(out, m.cols());
    for (double v : m.values()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline DenseMatrix read_matrix_binary(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kBinaryMatrixMagic) {
        throw IoError("matrix binary: bad magic");
    }
    const auto rows = detail::get_u64_le(in);
    const auto cols = detail::get_u64_le(in);
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = std::bit_cast<double>(detail::get_u64_le(in));
    return DenseMatrix(rows, cols, std::move(values));
}

/// Reads either format, sniffing the binary magic.
inline DenseMatrix load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<char, 8> head{};
    in.read(head.data(), head.size());
    const bool binary = in.gcount() == 8 && head == kBinaryMatrixMagic;
    in.clear();
    in.seekg(0);
    return binary ? read_matrix_binary(in) : read_matrix_text(in);
}

enum class MatrixFormat { Text, Binary };

inline void save_matrix(const std::filesystem::path& path, const DenseMatrix& m,
                        MatrixFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    if (format == MatrixFormat::Binary) {
        write_matrix_binary(out, m);
    } else {
        write_matrix_text(out, m);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace jacspec
