#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace splatcast::bank {

class BankError : public std::runtime_error {
public:
    explicit BankError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Lower-triangular Cholesky factor of a 2x2 covariance: Sigma = L L^T is
/// symmetric positive definite whenever l11, l22 > 0.
struct CholeskyParams {
    double l11 = 1.0;
    double l21 = 0.0;
    double l22 = 1.0;
};

/// Squared Mahalanobis distance delta^T Sigma^-1 delta, computed through the
/// triangular solve z = L^-1 delta.
double mahalanobis_sq(double dx, double dy, const CholeskyParams& p);

/// Unnormalized Gaussian density exp(-1/2 delta^T Sigma^-1 delta).
/// Degenerate factors (l11 or l22 <= 1e-8) are an error.
double gaussian_density(double dx, double dy, const CholeskyParams& p);

/**
 * @brief Frozen dictionary of M normalized, elliptically masked Gaussian
 * rasters sampled at integer cell offsets of an odd h x w window.
 *
 * Cells outside the ellipse delta^T Sigma^-1 delta <= r^2 are exactly zero;
 * each raster sums to 1. The bank is immutable after construction.
 */
class BasisBank {
public:
    BasisBank(const std::vector<CholeskyParams>& params, double mask_radius, int h, int w);

    int count() const { return static_cast<int>(params_.size()); }
    int height() const { return h_; }
    int width() const { return w_; }
    double mask_radius() const { return r_; }
    const std::vector<CholeskyParams>& params() const { return params_; }

    /// Raster m as an h*w row-major span.
    const double* raster(int m) const { return rasters_.data() + static_cast<std::size_t>(m) * h_ * w_; }
    const std::vector<double>& rasters_flat() const { return rasters_; }

    /// FNV-1a hash over the raster bytes; used to assert the bank stays
    /// frozen across training.
    std::uint64_t checksum() const;

    /// Text dump: "M h w" header line, then one row of w floats per line,
    /// h lines per raster. Round-trips losslessly.
    void dump(const std::string& path) const;
    static std::vector<double> load_dump(const std::string& path, int& m, int& h, int& w);

private:
    std::vector<CholeskyParams> params_;
    double r_;
    int h_, w_;
    std::vector<double> rasters_;  // M x h x w
};

/// Deterministic default discretizations. Supported sizes: 4, 8, 16, 32.
/// Scales come from {0.75, 1.5, 3.0, 6.0}; shears from {-1, 0, 1}.
std::vector<CholeskyParams> default_param_grid(int m);

}  // namespace splatcast::bank
