#include "pianoscribe/numerics/training.hpp"

namespace pianoscribe::nn {

void TrainingLog::write_csv(std::ostream& out) const
{
    const auto old_precision = out.precision(12);
    out << "epoch,train_nll,valid_nll,best_valid_nll\n";
    for (const EpochRecord& r : epochs) {
        out << r.epoch << ',' << r.train_nll << ',' << r.valid_nll << ',' << r.best_valid_nll << '\n';
    }
    out.precision(old_precision);
}

} // namespace pianoscribe::nn
