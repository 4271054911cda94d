#pragma once

#include <stdexcept>
#include <vector>

namespace splatcast::prep {

class PrepError : public std::runtime_error {
public:
    explicit PrepError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Per-window instance statistics. Population (biased) std convention,
/// clamped from below by eps so constant windows normalize to zeros.
struct RevinStats {
    double mean = 0.0;
    double std_dev = 1.0;
    double eps = 1e-8;
};

/// Normalize one look-back window to mean 0 / std 1 in place of a copy;
/// the stats are retained for denormalization.
std::vector<double> revin_normalize(const std::vector<double>& x, RevinStats& stats);

/// y_hat * std + mean, elementwise.
std::vector<double> revin_denormalize(const std::vector<double>& y_hat, const RevinStats& stats);

/// Row-major period fold of a 1-D series: row = one period of length
/// `period`, column = phase. The tail is zero-padded to a whole number of
/// rows.
struct FoldedGrid {
    std::vector<double> data;  // rows x period, row-major
    int rows = 0;
    int period = 0;
    int pad_count = 0;
};

/// A folded grid after bilinear upsampling to the branch's fixed resolution.
struct PeriodGrid {
    std::vector<double> data;  // rows_up x cols_up, row-major
    int rows_up = 0;
    int cols_up = 0;
    int source_period = 0;
    int source_rows = 0;
    int pad_count = 0;
};

/// Errors when period > len(x): the caller must pad to one full period first
/// (see pad_to_period).
FoldedGrid fold(const std::vector<double>& x, int period);

/// Inverse of fold: read the grid row-major and drop the padding.
std::vector<double> unfold(const FoldedGrid& g, int original_len);

/// Left-pad a series shorter than one period with its own mean. Series at
/// least one period long are returned unchanged.
std::vector<double> pad_to_period(const std::vector<double>& x, int period);

/// Bilinear resize (align-corners) of the folded grid to rows_up x cols_up.
PeriodGrid upsample(const FoldedGrid& g, int rows_up, int cols_up);

/// fold + upsample. Preconditions: 2 <= period <= len(x), rows_up, cols_up >= 2.
PeriodGrid fold_and_upsample(const std::vector<double>& x, int period, int rows_up, int cols_up);

}  // namespace splatcast::prep
