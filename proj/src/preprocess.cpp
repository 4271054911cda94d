#include "splatcast/preprocess.hpp"

#include <cmath>

#include "splatcast/ops.hpp"

namespace splatcast::prep {

std::vector<double> revin_normalize(const std::vector<double>& x, RevinStats& stats) {
    if (x.size() < 2) throw PrepError("revin_normalize: window needs at least 2 steps");
    const double n = static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += v;
    const double mu = acc / n;
    double var = 0.0;
    for (double v : x) {
        const double d = v - mu;
        var += d * d;
    }
    double sd = std::sqrt(var / n);
    if (sd < stats.eps) sd = stats.eps;
    stats.mean = mu;
    stats.std_dev = sd;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / sd;
    return out;
}

std::vector<double> revin_denormalize(const std::vector<double>& y_hat, const RevinStats& stats) {
    std::vector<double> out(y_hat.size());
    for (std::size_t i = 0; i < y_hat.size(); ++i) out[i] = y_hat[i] * stats.std_dev + stats.mean;
    return out;
}

FoldedGrid fold(const std::vector<double>& x, int period) {
    if (period < 2) throw PrepError("fold: period must be >= 2");
    const int len = static_cast<int>(x.size());
    if (period > len) {
        throw PrepError("fold: period " + std::to_string(period) + " exceeds series length " +
                        std::to_string(len) + "; pad to one full period first");
    }
    FoldedGrid g;
    g.period = period;
    g.rows = (len + period - 1) / period;
    g.pad_count = g.rows * period - len;
    g.data.assign(static_cast<std::size_t>(g.rows) * period, 0.0);
    for (int i = 0; i < len; ++i) g.data[static_cast<std::size_t>(i)] = x[i];
    return g;
}

std::vector<double> unfold(const FoldedGrid& g, int original_len) {
    if (original_len > g.rows * g.period) {
        throw PrepError("unfold: original length exceeds grid capacity");
    }
    return std::vector<double>(g.data.begin(), g.data.begin() + original_len);
}

std::vector<double> pad_to_period(const std::vector<double>& x, int period) {
    const int len = static_cast<int>(x.size());
    if (len >= period) return x;
    double acc = 0.0;
    for (double v : x) acc += v;
    const double mu = x.empty() ? 0.0 : acc / static_cast<double>(len);
    std::vector<double> out(static_cast<std::size_t>(period), mu);
    std::copy(x.begin(), x.end(), out.begin() + (period - len));
    return out;
}

PeriodGrid upsample(const FoldedGrid& g, int rows_up, int cols_up) {
    if (rows_up < 2 || cols_up < 2) throw PrepError("upsample: target resolution must be >= 2x2");
    diff::Tape tape(false);
    diff::Tensor in = diff::Tensor::constant({g.rows, g.period}, g.data);
    diff::Tensor out = diff::bilinear_resize(tape, in, rows_up, cols_up);
    PeriodGrid pg;
    pg.data = out.values();
    pg.rows_up = rows_up;
    pg.cols_up = cols_up;
    pg.source_period = g.period;
    pg.source_rows = g.rows;
    pg.pad_count = g.pad_count;
    return pg;
}

PeriodGrid fold_and_upsample(const std::vector<double>& x, int period, int rows_up, int cols_up) {
    return upsample(fold(x, period), rows_up, cols_up);
}

}  // namespace splatcast::prep
