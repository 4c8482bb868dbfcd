#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "roitomo/error.hpp"
#include "roitomo/grid.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/polyop.hpp"
#include "roitomo/solver.hpp"
#include "roitomo/xray.hpp"

namespace roitomo {

static_assert(std::endian::native == std::endian::little, "field files are written as little-endian binary64");

namespace detail {

/// %.17g: round-trips every double.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(const T* v, int count) {
    std::string s;
    for (int i = 0; i < count; ++i) {
        if (i) s += ',';
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    return is;
}

/// Value of `key=` in a whitespace-separated header.
inline std::string header_value(const std::string& header, const std::string& key) {
    std::istringstream is(header);
    std::string tok;
    while (is >> tok)
        if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
    throw ConfigError("field header lacks " + key + ": " + header);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ROIF1 / ROIV1

inline void write_field(std::ostream& os, const ScalarField& f) {
    const Grid& g = f.grid();
    int sizes[kMaxDim];
    double ext[kMaxDim];
    for (int a = 0; a < g.n(); ++a) {
        sizes[a] = g.size(a);
        ext[a] = g.extent(a);
    }
    os << "ROIF1 n=" << g.n() << " size=" << detail::join(sizes, g.n()) << " extent=" << detail::join(ext, g.n())
       << '\n';
    os.write(reinterpret_cast<const char*>(f.values().data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
    if (!os) throw ConfigError("failed writing field");
}

/// The file does not record the padding factor; `pad` is applied on read.
inline ScalarField read_field(std::istream& is, int pad = 2) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("ROIF1 ", 0) != 0) throw ConfigError("not an ROIF1 field");
    int n = 0;
    try {
        n = std::stoi(detail::header_value(header, "n"));
    } catch (const std::logic_error&) {
        throw ConfigError("bad ROIF1 dimension: " + header);
    }
    if (n < 1 || n > kMaxDim) throw ConfigError("bad ROIF1 dimension: " + header);
    const auto sz = detail::split(detail::header_value(header, "size"), ',');
    const auto ex = detail::split(detail::header_value(header, "extent"), ',');
    if (static_cast<int>(sz.size()) != n || static_cast<int>(ex.size()) != n) throw ConfigError("bad ROIF1 header: " + header);
    Index size{1, 1, 1};
    Point extent{0.0, 0.0, 0.0};
    try {
        for (int a = 0; a < n; ++a) {
            size[a] = std::stoi(sz[a]);
            extent[a] = std::stod(ex[a]);
        }
    } catch (const std::logic_error&) {
        throw ConfigError("bad ROIF1 header: " + header);
    }
    const Grid g(n, size, extent, pad);
    std::vector<double> v(g.node_count());
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw ConfigError("truncated ROIF1 payload");
    return ScalarField(g, std::move(v));
}

inline void write_field(std::ostream& os, const VectorField& F) {
    os << "ROIV1 n=" << F.n() << '\n';
    for (int i = 0; i < F.n(); ++i) write_field(os, F[i]);
}

inline VectorField read_vector_field(std::istream& is, int pad = 2) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("ROIV1 ", 0) != 0) throw ConfigError("not an ROIV1 field");
    const int n = std::stoi(detail::header_value(header, "n"));
    if (n < 1 || n > kMaxDim) throw ConfigError("bad ROIV1 dimension");
    std::vector<ScalarField> comps;
    for (int i = 0; i < n; ++i) comps.push_back(read_field(is, pad));
    return VectorField(std::move(comps));
}

inline void save_field(const std::string& path, const ScalarField& f) {
    auto os = detail::open_out(path);
    write_field(os, f);
}

inline void save_field(const std::string& path, const VectorField& F) {
    auto os = detail::open_out(path);
    write_field(os, F);
}

inline ScalarField load_field(const std::string& path, int pad = 2) {
    auto is = detail::open_in(path);
    return read_field(is, pad);
}

inline VectorField load_vector_field(const std::string& path, int pad = 2) {
    auto is = detail::open_in(path);
    return read_vector_field(is, pad);
}

// ---------------------------------------------------------------------------
// LineSet / Sinogram CSV

inline void write_lineset_csv(std::ostream& os, const LineSet& ls, const std::vector<double>* values = nullptr) {
    const int n = ls.n();
    os << "angle_index,offset_index";
    for (int i = 0; i < n; ++i) os << ",theta_" << i;
    for (int i = 0; i < n; ++i) os << ",z_" << i;
    if (values) os << ",value";
    os << '\n';
    for (std::size_t k = 0; k < ls.size(); ++k) {
        const Line& l = ls[k];
        os << l.angle_index << ',' << l.offset_index;
        for (int i = 0; i < n; ++i) os << ',' << detail::fmt(l.theta[i]);
        for (int i = 0; i < n; ++i) os << ',' << detail::fmt(l.z[i]);
        if (values) os << ',' << detail::fmt((*values)[k]);
        os << '\n';
    }
}

inline void write_sinogram_csv(std::ostream& os, const Sinogram& s) { write_lineset_csv(os, s.lines, &s.values); }

/// Reads a sinogram CSV against the line set it was written from. The line
/// indices must match row by row.
inline Sinogram read_sinogram_csv(std::istream& is, const LineSet& ls) {
    std::string row;
    if (!std::getline(is, row) || row.rfind("angle_index,offset_index", 0) != 0 || row.find(",value") == std::string::npos)
        throw ConfigError("not a sinogram CSV");
    Sinogram s(ls);
    std::size_t k = 0;
    while (std::getline(is, row)) {
        if (row.empty()) continue;
        const auto cols = detail::split(row, ',');
        if (k >= ls.size() || cols.size() != static_cast<std::size_t>(3 + 2 * ls.n()))
            throw ConfigError("sinogram CSV does not match the line set");
        try {
            if (std::stoi(cols[0]) != ls[k].angle_index || std::stoi(cols[1]) != ls[k].offset_index)
                throw ConfigError("sinogram CSV row " + std::to_string(k) + " belongs to another line");
            s.values[k] = std::stod(cols.back());
        } catch (const std::logic_error&) {
            throw ConfigError("malformed sinogram CSV row " + std::to_string(k));
        }
        ++k;
    }
    if (k != ls.size()) throw ConfigError("sinogram CSV has " + std::to_string(k) + " rows, expected " + std::to_string(ls.size()));
    return s;
}

// ---------------------------------------------------------------------------
// 16-bit PGM previews, min-max normalised

/// Binary P5, maxval 65535, big-endian samples. A constant image maps to 0.
inline void write_pgm(std::ostream& os, std::span<const double> v, int width, int height) {
    if (width < 1 || height < 1 || v.size() != static_cast<std::size_t>(width) * height)
        throw GeometryError("PGM dimensions do not match the data");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    os << "P5\n" << width << ' ' << height << "\n65535\n";
    std::vector<unsigned char> buf(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = hi > lo ? (v[i] - lo) / (hi - lo) : 0.0;
        const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        buf[2 * i] = static_cast<unsigned char>(q >> 8);
        buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

/// 2D fields as they are (x down the rows); 3D fields by their middle slice
/// in the last axis.
inline void write_pgm(std::ostream& os, const ScalarField& f) {
    const Grid& g = f.grid();
    if (g.n() == 1) return write_pgm(os, f.values(), g.size(0), 1);
    const int rows = g.size(0), cols = g.size(1);
    std::vector<double> img(static_cast<std::size_t>(rows) * cols);
    const int mid = g.n() == 3 ? g.size(2) / 2 : 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) img[static_cast<std::size_t>(i) * cols + j] = f[g.flat({i, j, mid})];
    write_pgm(os, img, cols, rows);
}

/// Angles down the rows, offsets across; lines filtered out of the lattice
/// show as zero.
inline void write_pgm(std::ostream& os, const Sinogram& s) {
    const auto table = detail::lattice_table(s);
    const int rows = s.lines.n_angles();
    write_pgm(os, table, static_cast<int>(table.size() / rows), rows);
}

template <class T>
void save_pgm(const std::string& path, const T& x) {
    auto os = detail::open_out(path);
    write_pgm(os, x);
}

// ---------------------------------------------------------------------------
// PolyOp text: one term per line, `alpha_1 ... alpha_n  re  im`; `#` comments.

inline void write_polyop(std::ostream& os, const PolyOp& p) {
    for (const auto& [alpha, c] : p.terms()) {
        for (int a : alpha) os << a << ' ';
        os << ' ' << detail::fmt(c.real()) << ' ' << detail::fmt(c.imag()) << '\n';
    }
}

inline PolyOp read_polyop(std::istream& is, int n) {
    PolyOp::Terms terms;
    std::string row;
    int line = 0;
    while (std::getline(is, row)) {
        ++line;
        if (const auto h = row.find('#'); h != std::string::npos) row.erase(h);
        std::istringstream ls(row);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (static_cast<int>(tok.size()) != n + 2)
            throw ConfigError("PolyOp line " + std::to_string(line) + ": expected " + std::to_string(n) + " exponents, re, im");
        MultiIndex alpha(n);
        try {
            for (int i = 0; i < n; ++i) {
                std::size_t used = 0;
                alpha[i] = std::stoi(tok[i], &used);
                if (used != tok[i].size() || alpha[i] < 0) throw std::invalid_argument("exponent");
            }
            terms[alpha] += Complex(std::stod(tok[n]), std::stod(tok[n + 1]));
        } catch (const std::logic_error&) {
            throw ConfigError("PolyOp line " + std::to_string(line) + " is malformed");
        }
    }
    if (terms.empty()) throw ConfigError("PolyOp file has no terms");
    try {
        return PolyOp(n, std::move(terms));
    } catch (const Error& e) {
        throw ConfigError(std::string("PolyOp file: ") + e.what());
    }
}

inline PolyOp load_polyop(const std::string& path, int n) {
    auto is = detail::open_in(path);
    return read_polyop(is, n);
}

// ---------------------------------------------------------------------------
// SolveReport as key=value text

inline void write_report(std::ostream& os, const SolveReport& r) {
    auto stream = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::fmt(v[i]);
        return s;
    };
    os << "status=" << r.status << '\n'
       << "converged=" << (r.converged ? "true" : "false") << '\n'
       << "iterations=" << r.iterations << '\n'
       << "restarts=" << r.restarts << '\n'
       << "data_residual=" << detail::fmt(r.data_residual) << '\n'
       << "prior_residual=" << detail::fmt(r.prior_residual) << '\n'
       << "objective=" << detail::fmt(r.objective) << '\n'
       << "relative_residual=" << detail::fmt(r.relative_residual) << '\n';
    if (r.relative_error) os << "rel_error=" << detail::fmt(*r.relative_error) << '\n';
    os << "line_count=" << r.line_count << '\n'
       << "unknowns=" << r.unknowns << '\n'
       << "wall_time_s=" << detail::fmt(r.wall_time_s) << '\n'
       << "restart_objectives=" << stream(r.restart_objectives) << '\n'
       << "data_stream=" << stream(r.data_stream) << '\n'
       << "prior_stream=" << stream(r.prior_stream) << '\n';
}

}  // namespace roitomo
