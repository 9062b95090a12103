#pragma once

// TraceField import/export.
//
// CSV: one metadata comment "# N=<N> n=<n> L=<L>", a header "y0[,y1[,y2]],value",
// then one row per grid point in row-major order (last axis fastest).
//
// Binary (little-endian): eight uint64 header words
//   magic, N, n, bits of L as float64, dtype tag (1 = float64), 0, 0, 0
// followed by n^N float64 values in the same order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hartree/errors.hpp"
#include "hartree/spectral.hpp"

namespace hartree {

static_assert(std::endian::native == std::endian::little, "binary field format assumes a little-endian host");

inline constexpr std::uint64_t kFieldMagic = 0x444c454946545248ULL;  // "HRTFIELD" read as little-endian bytes
inline constexpr std::uint64_t kFieldFloat64 = 1;

inline void write_field_csv(const TraceField& h, std::ostream& os) {
    const Grid& g = h.grid;
    os << "# N=" << g.dim() << " n=" << g.n() << " L=" << std::setprecision(17) << g.half_length() << '\n';
    for (int a = 0; a < g.dim(); ++a) os << 'y' << a << ',';
    os << "value\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto idx = g.unflatten(i);
        for (int a = 0; a < g.dim(); ++a) os << g.coordinate(idx[a]) << ',';
        os << h[i] << '\n';
    }
}

inline TraceField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw IoError("field CSV: missing '# N= n= L=' line");
    int N = 0, n = 0;
    double L = 0.0;
    {
        std::istringstream meta(line.substr(2));
        std::string tok;
        while (meta >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const auto key = tok.substr(0, eq);
            const auto val = tok.substr(eq + 1);
            try {
                if (key == "N") N = std::stoi(val);
                else if (key == "n") n = std::stoi(val);
                else if (key == "L") L = std::stod(val);
            } catch (const std::exception&) {
                throw IoError("field CSV: bad metadata value '" + tok + "'");
            }
        }
    }
    Grid g = [&]() {
        try {
            return Grid(N, L, n);
        } catch (const DomainError& e) {
            throw IoError(std::string("field CSV: ") + e.what());
        }
    }();
    if (!std::getline(is, line)) throw IoError("field CSV: missing header row");
    TraceField h(g);
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (row >= g.size()) throw IoError("field CSV: more rows than n^N");
        const auto comma = line.rfind(',');
        const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || !std::isfinite(v))
            throw IoError("field CSV: bad value on data row " + std::to_string(row + 1));
        h[row++] = v;
    }
    if (row != g.size())
        throw IoError("field CSV: truncated, " + std::to_string(row) + " of " + std::to_string(g.size()) + " rows");
    return h;
}

inline void write_field_binary(const TraceField& h, std::ostream& os) {
    const Grid& g = h.grid;
    const std::uint64_t header[8] = {kFieldMagic,
                                     static_cast<std::uint64_t>(g.dim()),
                                     static_cast<std::uint64_t>(g.n()),
                                     std::bit_cast<std::uint64_t>(g.half_length()),
                                     kFieldFloat64,
                                     0,
                                     0,
                                     0};
    os.write(reinterpret_cast<const char*>(header), sizeof header);
    os.write(reinterpret_cast<const char*>(h.values.data()), static_cast<std::streamsize>(h.size() * sizeof(double)));
}

inline TraceField read_field_binary(std::istream& is) {
    std::uint64_t header[8];
    if (!is.read(reinterpret_cast<char*>(header), sizeof header)) throw IoError("field binary: truncated header");
    if (header[0] != kFieldMagic) throw IoError("field binary: bad magic");
    if (header[4] != kFieldFloat64) throw IoError("field binary: unsupported dtype tag");
    Grid g = [&]() {
        try {
            return Grid(static_cast<int>(header[1]), std::bit_cast<double>(header[3]),
                        static_cast<int>(header[2]));
        } catch (const DomainError& e) {
            throw IoError(std::string("field binary: ") + e.what());
        }
    }();
    TraceField h(g);
    if (!is.read(reinterpret_cast<char*>(h.values.data()), static_cast<std::streamsize>(h.size() * sizeof(double))))
        throw IoError("field binary: truncated data");
    for (double v : h.values)
        if (!std::isfinite(v)) throw IoError("field binary: non-finite value");
    return h;
}

inline bool is_binary_path(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
}

inline void save_field(const TraceField& h, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write field file '" + path + "'");
    if (is_binary_path(path)) write_field_binary(h, os);
    else write_field_csv(h, os);
    if (!os) throw IoError("error while writing '" + path + "'");
}

/// Format chosen by extension: ".bin" is binary, anything else CSV.
inline TraceField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open field file '" + path + "'");
    return is_binary_path(path) ? read_field_binary(is) : read_field_csv(is);
}

}  // namespace hartree
