#include "splatcast/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace splatcast::data {

namespace {
const SplitRatio kEttRatio{0.6, 0.2, 0.2};
const SplitRatio kLargeRatio{0.7, 0.1, 0.2};
}  // namespace

std::optional<KnownDataset> known_dataset(const std::string& name) {
    if (name == "ETTh1" || name == "ETTh2") return KnownDataset{kEttRatio, 14400, "1 Hour"};
    if (name == "ETTm1" || name == "ETTm2") return KnownDataset{kEttRatio, 56700, "15 Minutes"};
    if (name == "Weather") return KnownDataset{kLargeRatio, 52696, "10 Minutes"};
    if (name == "Electricity") return KnownDataset{kLargeRatio, 26304, "1 Hour"};
    if (name == "Traffic") return KnownDataset{kLargeRatio, 17544, "1 Hour"};
    return std::nullopt;
}

Dataset::Dataset(std::string name, int channels, std::vector<double> rows_flat,
                 SplitRatio ratio, std::string frequency)
    : name_(std::move(name)),
      channels_(channels),
      length_(static_cast<long>(rows_flat.size()) / channels),
      rows_(std::move(rows_flat)),
      ratio_(ratio),
      frequency_(std::move(frequency)) {
    if (channels_ <= 0) throw DataError("dataset: channel count must be positive");
    if (rows_.size() % static_cast<std::size_t>(channels_) != 0) {
        throw DataError("dataset: row data not divisible by channel count");
    }
}

long Dataset::split_begin(Split s) const {
    const long train_len = static_cast<long>(length_ * ratio_.train);
    const long val_len = static_cast<long>(length_ * ratio_.val);
    switch (s) {
        case Split::train: return 0;
        case Split::val: return train_len;
        case Split::test: return train_len + val_len;
    }
    return 0;
}

long Dataset::split_length(Split s) const {
    const long train_len = static_cast<long>(length_ * ratio_.train);
    const long val_len = static_cast<long>(length_ * ratio_.val);
    switch (s) {
        case Split::train: return train_len;
        case Split::val: return val_len;
        case Split::test: return length_ - train_len - val_len;
    }
    return 0;
}

void Dataset::standardize_by_train_stats() {
    if (standardized_) return;
    const long n = split_length(Split::train);
    if (n < 2) throw DataError("dataset: train split too short to standardize");
    ch_mean_.assign(channels_, 0.0);
    ch_std_.assign(channels_, 0.0);
    for (int c = 0; c < channels_; ++c) {
        double acc = 0.0;
        for (long r = 0; r < n; ++r) acc += at(r, c);
        const double mu = acc / static_cast<double>(n);
        double var = 0.0;
        for (long r = 0; r < n; ++r) {
            const double d = at(r, c) - mu;
            var += d * d;
        }
        double sd = std::sqrt(var / static_cast<double>(n));
        if (sd < 1e-8) sd = 1e-8;
        ch_mean_[c] = mu;
        ch_std_[c] = sd;
        for (long r = 0; r < length_; ++r) {
            rows_[static_cast<std::size_t>(r) * channels_ + c] = (at(r, c) - mu) / sd;
        }
    }
    standardized_ = true;
}

std::vector<double> TemporalWindow::x_col(int channel) const {
    const long base = source->split_begin(split) + index;
    std::vector<double> out(static_cast<std::size_t>(lookback));
    for (int i = 0; i < lookback; ++i) out[i] = source->at(base + i, channel);
    return out;
}

std::vector<double> TemporalWindow::y_col(int channel) const {
    const long base = source->split_begin(split) + index + lookback;
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int i = 0; i < horizon; ++i) out[i] = source->at(base + i, channel);
    return out;
}

Dataset load_csv(const std::string& path, SplitRatio ratio, const std::string& dataset_name) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: '" + path + "' is empty");
    // header row: count columns
    int columns = 1;
    for (char ch : line) {
        if (ch == ',') ++columns;
    }
    if (columns < 2) {
        throw DataError("load_csv: '" + path + "' needs a timestamp column plus at least one channel");
    }
    const int channels = columns - 1;

    std::vector<double> rows;
    std::string prev_stamp;
    long row_no = 1;  // 1-based, header is row 1
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        int col = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t end = line.find(',', start);
            const std::string_view cell(line.data() + start,
                                        (end == std::string::npos ? line.size() : end) - start);
            if (col == 0) {
                // timestamp: kept only for an ordering sanity check
                if (!prev_stamp.empty() && cell.size() == prev_stamp.size() &&
                    std::string(cell) < prev_stamp) {
                    throw DataError("load_csv: timestamps out of order at row " +
                                    std::to_string(row_no));
                }
                prev_stamp.assign(cell);
            } else {
                if (cell.empty()) {
                    throw DataError("load_csv: blank cell at row " + std::to_string(row_no) +
                                    ", column " + std::to_string(col + 1));
                }
                double v = 0.0;
                const char* first = cell.data();
                const char* last = cell.data() + cell.size();
                auto [ptr, ec] = std::from_chars(first, last, v);
                if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
                    throw DataError("load_csv: non-numeric cell '" + std::string(cell) +
                                    "' at row " + std::to_string(row_no) + ", column " +
                                    std::to_string(col + 1));
                }
                rows.push_back(v);
            }
            ++col;
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (col != columns) {
            throw DataError("load_csv: row " + std::to_string(row_no) + " has " +
                            std::to_string(col) + " columns, expected " + std::to_string(columns));
        }
    }
    if (rows.empty()) throw DataError("load_csv: '" + path + "' has no data rows");

    long length = static_cast<long>(rows.size()) / channels;
    std::string frequency = "unknown";
    if (auto known = known_dataset(dataset_name)) {
        if (length < known->declared_length) {
            throw DataError("load_csv: dataset '" + dataset_name + "' has " +
                            std::to_string(length) + " rows, expected at least " +
                            std::to_string(known->declared_length));
        }
        if (length > known->declared_length) {
            length = known->declared_length;
            rows.resize(static_cast<std::size_t>(length) * channels);
        }
        ratio = known->ratio;
        frequency = known->frequency;
    }
    return Dataset(dataset_name.empty() ? path : dataset_name, channels, std::move(rows), ratio,
                   frequency);
}

Dataset load_named_csv(const std::string& path, const std::string& name) {
    auto known = known_dataset(name);
    return load_csv(path, known ? known->ratio : SplitRatio{}, name);
}

std::vector<TemporalWindow> windows(const Dataset& ds, Split split, int lookback, int horizon,
                                    int stride) {
    if (lookback < 2 || horizon < 1) throw DataError("windows: lookback must be >= 2, horizon >= 1");
    if (stride < 1) throw DataError("windows: stride must be >= 1");
    const long len = ds.split_length(split);
    const long need = static_cast<long>(lookback) + horizon;
    if (len < need) {
        throw DataError("windows: split has " + std::to_string(len) + " rows, needs at least " +
                        std::to_string(need) + " (I+O)");
    }
    std::vector<TemporalWindow> out;
    const long count = len - need + 1;
    for (long i = 0; i < count; i += stride) {
        out.push_back(TemporalWindow{&ds, split, i, lookback, horizon});
    }
    return out;
}

}  // namespace splatcast::data
