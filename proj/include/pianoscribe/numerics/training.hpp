#pragma once

#include <limits>
#include <ostream>
#include <vector>

namespace pianoscribe::nn {

struct EpochRecord {
    int epoch = 0;
    double train_nll = 0.0;  // mean per-frame NLL, nats
    double valid_nll = 0.0;
    double best_valid_nll = 0.0;  // best so far, including this epoch
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    bool stopped_early = false;

    void write_csv(std::ostream& out) const;
};

/// Tracks the best validation loss. should_stop() turns true once `patience`
/// consecutive epochs fail to improve on the best.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Returns true when `loss` is a new best.
    bool update(double loss)
    {
        ++epoch_;
        if (loss < best_) {
            best_ = loss;
            best_epoch_ = epoch_ - 1;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        return false;
    }

    bool should_stop() const { return patience_ > 0 && since_best_ >= patience_; }
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = -1;
    int since_best_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

} // namespace pianoscribe::nn
