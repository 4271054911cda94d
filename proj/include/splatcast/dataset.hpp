#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatcast::data {

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Split { train, val, test };

struct SplitRatio {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/// Known benchmark metadata: chronological split ratios and declared lengths.
/// Files longer than the declared length are truncated to it so the split
/// boundaries land where the benchmark protocol expects.
struct KnownDataset {
    SplitRatio ratio;
    long declared_length;
    std::string frequency;
};

std::optional<KnownDataset> known_dataset(const std::string& name);

/**
 * @brief A loaded multivariate series with chronological train/val/test splits.
 *
 * Rows are time-ordered; column 0 of the source CSV (the timestamp) is
 * dropped from the value matrix. Channels may be globally standardized with
 * train-split statistics (the benchmark protocol); metrics then live in that
 * standardized space.
 */
class Dataset {
public:
    Dataset(std::string name, int channels, std::vector<double> rows_flat,
            SplitRatio ratio, std::string frequency);

    const std::string& name() const { return name_; }
    int channels() const { return channels_; }
    long length() const { return length_; }
    const std::string& frequency() const { return frequency_; }
    const SplitRatio& ratio() const { return ratio_; }

    double at(long row, int channel) const {
        return rows_[static_cast<std::size_t>(row) * channels_ + channel];
    }

    long split_begin(Split s) const;
    long split_length(Split s) const;

    /// Standardize every channel in place using train-split mean/std.
    void standardize_by_train_stats();
    bool standardized() const { return standardized_; }
    const std::vector<double>& channel_means() const { return ch_mean_; }
    const std::vector<double>& channel_stds() const { return ch_std_; }

private:
    std::string name_;
    int channels_;
    long length_;
    std::vector<double> rows_;  // row-major length x channels
    SplitRatio ratio_;
    std::string frequency_;
    bool standardized_ = false;
    std::vector<double> ch_mean_, ch_std_;
};

/**
 * @brief One (look-back, horizon) sample: x is rows [start, start+I),
 * y is rows [start+I, start+I+O) of the owning split. A lightweight view;
 * the column accessors materialize contiguous per-channel vectors.
 */
struct TemporalWindow {
    const Dataset* source = nullptr;
    Split split = Split::train;
    long index = 0;  // offset within the split
    int lookback = 0;
    int horizon = 0;

    std::vector<double> x_col(int channel) const;
    std::vector<double> y_col(int channel) const;
};

/// Load a benchmark CSV: UTF-8, one header row, column 0 a timestamp string,
/// remaining columns 64-bit-parsable decimals. Blank or non-numeric cells are
/// rejected with their row/column position.
Dataset load_csv(const std::string& path, SplitRatio ratio,
                 const std::string& dataset_name = "");

/// Load by benchmark name: applies the known split ratio and declared length.
Dataset load_named_csv(const std::string& path, const std::string& name);

/// Sliding windows over one split, ordered by index.
/// count = split_length - I - O + 1 (stride 1).
std::vector<TemporalWindow> windows(const Dataset& ds, Split split, int lookback,
                                    int horizon, int stride = 1);

}  // namespace splatcast::data
