#pragma once

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "roitomo/grid.hpp"

namespace roitomo {

using Complex = std::complex<double>;

namespace detail {

// The FFTW planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

/// In-place c2c transform of a row-major array; sign -1 forward, +1 inverse.
/// Unnormalized. FFTW_ESTIMATE keeps the chosen algorithm, and therefore the
/// rounding, identical from run to run.
inline void fft_inplace(std::vector<Complex>& data, int n, const Index& dims, int sign) {
    std::unique_ptr<fftw_complex, FftwFree> buf(fftw_alloc_complex(data.size()));
    std::copy(data.begin(), data.end(), reinterpret_cast<Complex*>(buf.get()));
    int d[kMaxDim] = {dims[0], dims[1], dims[2]};
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft(n, d, buf.get(), buf.get(), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    const Complex* out = reinterpret_cast<const Complex*>(buf.get());
    std::copy(out, out + data.size(), data.begin());
}

inline int signed_bin(int k, int m) { return k <= m / 2 ? k : k - m; }

}  // namespace detail

/// Spectrum of a field on the zero-padded grid.
///
/// Bin k along axis a has frequency xi = 2*pi*k_signed / (M_a h), i.e.
/// pi*k/extent of the padded box. The transform approximates the continuous
/// Fourier transform: F(xi) = h^n sum_x f(x) e^{-i x.xi} with x measured from
/// the origin node, and the inverse divides by the padded box volume.
class Spectrum {
public:
    Spectrum() = default;
    Spectrum(Grid grid, Index dims) : grid_(std::move(grid)), dims_(dims) {
        std::size_t c = 1;
        for (int a = 0; a < grid_.n(); ++a) c *= dims_[a];
        data_.assign(c, Complex(0.0, 0.0));
    }

    /// Spectrum buffer for a grid: padded dims pad * size.
    static Spectrum zeros(const Grid& grid) {
        Index d{1, 1, 1};
        for (int a = 0; a < grid.n(); ++a) d[a] = grid.size(a) * grid.pad();
        return Spectrum(grid, d);
    }

    const Grid& grid() const { return grid_; }
    const Index& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    std::vector<Complex>& data() { return data_; }
    const std::vector<Complex>& data() const { return data_; }
    Complex& operator[](std::size_t k) { return data_[k]; }
    const Complex& operator[](std::size_t k) const { return data_[k]; }

    /// Frequency spacing along an axis.
    double dxi(int axis) const { return 2.0 * std::numbers::pi / (dims_[axis] * grid_.h()); }

    Index bin(std::size_t k) const {
        Index b{0, 0, 0};
        for (int a = grid_.n() - 1; a >= 0; --a) {
            b[a] = static_cast<int>(k % dims_[a]);
            k /= dims_[a];
        }
        return b;
    }

    std::size_t flat(const Index& b) const {
        std::size_t k = 0;
        for (int a = 0; a < grid_.n(); ++a) k = k * dims_[a] + b[a];
        return k;
    }

    Point frequency(std::size_t k) const {
        const Index b = bin(k);
        Point xi{0.0, 0.0, 0.0};
        for (int a = 0; a < grid_.n(); ++a) xi[a] = detail::signed_bin(b[a], dims_[a]) * dxi(a);
        return xi;
    }

    /// True when some axis sits on the unpaired Nyquist bin.
    bool on_nyquist(std::size_t k, int axis) const {
        const Index b = bin(k);
        return dims_[axis] % 2 == 0 && b[axis] == dims_[axis] / 2;
    }

    template <class Multiplier>
    Spectrum& multiply(Multiplier&& m) {
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] *= m(frequency(k), k);
        return *this;
    }

private:
    Grid grid_;
    Index dims_{1, 1, 1};
    std::vector<Complex> data_;
};

/// Real field recovered from a spectrum, with the discarded imaginary part.
struct InverseResult {
    ScalarField field;
    double imag_residue = 0.0;  ///< L2 norm of the discarded imaginary part
};

namespace detail {

inline std::size_t padded_slot(const Grid& g, const Index& dims, const Index& node) {
    std::size_t k = 0;
    for (int a = 0; a < g.n(); ++a) {
        int m = node[a] - g.size(a) / 2;
        if (m < 0) m += dims[a];
        k = k * dims[a] + m;
    }
    return k;
}

}  // namespace detail

/// Zero-pad f to the padded box and transform.
inline Spectrum spectral_forward(const ScalarField& f) {
    const Grid& g = f.grid();
    Spectrum s = Spectrum::zeros(g);
    for (std::size_t k = 0; k < f.size(); ++k) s[detail::padded_slot(g, s.dims(), g.unflat(k))] = f[k];
    detail::fft_inplace(s.data(), g.n(), s.dims(), FFTW_FORWARD);
    const double vol = g.cell_volume();
    for (auto& c : s.data()) c *= vol;
    return s;
}

/// Inverse transform and crop back to the unpadded grid.
inline InverseResult spectral_inverse(Spectrum s) {
    const Grid& g = s.grid();
    detail::fft_inplace(s.data(), g.n(), s.dims(), FFTW_BACKWARD);
    double box = 1.0;
    for (int a = 0; a < std::min(g.n(), kMaxDim); ++a) box *= s.dims()[a] * g.h();
    InverseResult r{ScalarField(g), 0.0};
    double im2 = 0.0;
    for (std::size_t k = 0; k < r.field.size(); ++k) {
        const Complex v = s[detail::padded_slot(g, s.dims(), g.unflat(k))] / box;
        r.field[k] = v.real();
        im2 += v.imag() * v.imag();
    }
    r.imag_residue = std::sqrt(im2 * g.cell_volume());
    return r;
}

/// Pairing (2 pi)^{-n} sum F conj(G) dxi^n, equal to <f, g> by Parseval.
inline double spectral_inner_product(const Spectrum& a, const Spectrum& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] * std::conj(b[k])).real();
    double box = 1.0;
    for (int ax = 0; ax < a.grid().n(); ++ax) box *= a.dims()[ax] * a.grid().h();
    return s / box;
}

/// Circular convolution on the padded box with a kernel given as a function
/// of the minimum-image displacement x. Returns h^n sum_y K(x - y) f(y).
template <class Kernel>
Spectrum kernel_spectrum(const Grid& g, Kernel&& kernel) {
    Spectrum ks = Spectrum::zeros(g);
    const Index& d = ks.dims();
    const double h = g.h();
    for (std::size_t k = 0; k < ks.size(); ++k) {
        const Index b = ks.bin(k);
        Point x{0.0, 0.0, 0.0};
        for (int a = 0; a < g.n(); ++a) x[a] = detail::signed_bin(b[a], d[a]) * h;
        ks[k] = kernel(x);
    }
    detail::fft_inplace(ks.data(), g.n(), d, FFTW_FORWARD);
    const double vol = g.cell_volume();
    for (auto& c : ks.data()) c *= vol;
    return ks;
}

}  // namespace roitomo
