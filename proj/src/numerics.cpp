#include "cefr/numerics.hpp"

#include <algorithm>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "cefr/error.hpp"

namespace cefr {

namespace {

constexpr double kMinRcond = 1e-14;
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorKind::input, "numerics", std::string(what) + " has non-finite entries");
}

[[noreturn]] void throw_singular(double rcond, double pivot) {
    std::ostringstream os;
    os << "numerically singular system (reciprocal condition " << rcond << ", smallest pivot " << pivot << ")";
    throw Error(ErrorKind::singular, "numerics", os.str());
}

template <class Rhs>
Rhs solve_impl(const SymMatrix& a, const Rhs& b) {
    const Eigen::MatrixXd& m = a.matrix();
    require_finite(m, "matrix");
    require_finite(b, "right-hand side");
    if (static_cast<std::size_t>(b.rows()) != a.dim())
        throw Error(ErrorKind::input, "numerics", "right-hand side length does not match matrix");
    if (a.dim() == 0) return b;
    if (a.dim() == 1) {
        // Scalar systems are solved by a single division.
        const double d = m(0, 0);
        if (d == 0.0) throw_singular(0.0, 0.0);
        return Rhs(b / d);
    }

    Rhs x;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success && llt.rcond() >= kMinRcond) {
        x = llt.solve(b);
        x += llt.solve(Rhs(b - m * x));
    } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
        double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
        // LDLT zeroes tiny pivots in its solver, so its rcond misses exact rank loss.
        const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
        if (d.size() > 0) rcond = std::min(rcond, d.maxCoeff() > 0.0 ? d.minCoeff() / d.maxCoeff() : 0.0);
        if (!(rcond >= kMinRcond)) throw_singular(rcond, ldlt.vectorD().cwiseAbs().minCoeff());
        x = ldlt.solve(b);
        x += ldlt.solve(Rhs(b - m * x));
    }
    if (!x.allFinite()) throw_singular(0.0, 0.0);
    return x;
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::input, "numerics", "SymMatrix requires a square matrix");
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(std::size_t k) { return SymMatrix(Eigen::MatrixXd::Zero(k, k)); }

SymMatrix SymMatrix::identity(std::size_t k) { return SymMatrix(Eigen::MatrixXd::Identity(k, k)); }

SymMatrix SymMatrix::plus_ridge(double lambda) const {
    SymMatrix out = *this;
    out.m_.diagonal().array() += lambda;
    return out;
}

Eigen::VectorXd solve_sym(const SymMatrix& a, const Eigen::VectorXd& b) { return solve_impl(a, b); }

Eigen::MatrixXd solve_sym(const SymMatrix& a, const Eigen::MatrixXd& b) { return solve_impl(a, b); }

Eigen::MatrixXd psd_sqrt(const SymMatrix& m) {
    require_finite(m.matrix(), "matrix");
    if (m.dim() == 0) return Eigen::MatrixXd(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix());
    if (es.info() != Eigen::Success) throw Error(ErrorKind::input, "numerics", "eigendecomposition failed");
    Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd& v = es.eigenvectors();
    Eigen::MatrixXd s = v * root.asDiagonal() * v.transpose();
    return 0.5 * (s + s.transpose());
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), key_(splitmix64(seed ^ 0x6A09E667F3BCC908ULL)) {}

std::uint64_t SeededRng::next_u64() { return splitmix64(key_ + kGolden * counter_++); }

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double x, y, s;
    do {
        x = 2.0 * uniform() - 1.0;
        y = 2.0 * uniform() - 1.0;
        s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * f;
    has_spare_ = true;
    return x * f;
}

std::size_t SeededRng::below(std::size_t n) {
    if (n == 0) return 0;
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

SeededRng SeededRng::derive(std::uint64_t stream) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 0xA5A5A5A5ULL)));
}

std::vector<double> std_normal_draws(SeededRng& rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::domain, "numerics", "normal quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

double sample_quantile(std::vector<double> x, double q) {
    if (x.empty()) throw Error(ErrorKind::input, "numerics", "quantile of an empty sample");
    std::sort(x.begin(), x.end());
    double h = q * static_cast<double>(x.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace cefr
