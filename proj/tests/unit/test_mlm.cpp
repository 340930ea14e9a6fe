#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/mlm/nade.hpp"
#include "pianoscribe/mlm/rnn_nade.hpp"

using namespace pianoscribe;
using namespace pianoscribe::mlm;
using nn::Index;
using nn::Matrix;
using nn::Vector;

namespace {

Vector bits_of(unsigned code, Index d)
{
    Vector v(d);
    for (Index i = 0; i < d; ++i) v(i) = (code >> i) & 1u ? 1.0 : 0.0;
    return v;
}

Nade random_nade(nn::Rng& rng, Index d, Index h, double scale = 2.0)
{
    Nade n(d, h);
    nn::fill_uniform(n.W, scale, rng);
    nn::fill_uniform(n.V, scale, rng);
    Matrix bh(h, 1), bv(d, 1);
    nn::fill_uniform(bh, scale, rng);
    nn::fill_uniform(bv, scale, rng);
    n.b_h = bh.col(0);
    n.b_v = bv.col(0);
    return n;
}

double total_probability(const Nade& n)
{
    double sum = 0.0;
    for (unsigned code = 0; code < (1u << n.visible()); ++code) sum += std::exp(nade_log_prob(n, bits_of(code, n.visible())));
    return sum;
}

// One prefix at a time with scalar loops.
double prefix_log_prob(const Nade& n, const Vector& v)
{
    double lp = 0.0;
    for (Index i = 0; i < n.visible(); ++i) {
        double logit = n.b_v(i);
        for (Index k = 0; k < n.hidden(); ++k) {
            double a = n.b_h(k);
            for (Index j = 0; j < i; ++j) a += n.W(k, j) * v(j);
            logit += n.V(i, k) / (1.0 + std::exp(-a));
        }
        const double p = 1.0 / (1.0 + std::exp(-logit));
        lp += std::log(v(i) != 0.0 ? p : 1.0 - p);
    }
    return lp;
}

RnnNade random_rnn_nade(nn::Rng& rng, RnnNadeConfig c, double scale = 0.5)
{
    RnnNade m(c);
    m.init(rng);
    for (nn::Parameter* p : m.parameters()) {
        Matrix noise(p->value.rows(), p->value.cols());
        nn::fill_uniform(noise, scale, rng);
        p->value += noise;
    }
    return m;
}

Matrix random_frames(nn::Rng& rng, Index d, Index t, double density = 0.3)
{
    std::bernoulli_distribution coin(density);
    Matrix m(d, t);
    for (Index j = 0; j < t; ++j)
        for (Index i = 0; i < d; ++i) m(i, j) = coin(rng) ? 1.0 : 0.0;
    return m;
}

roll::PianoRoll two_chord_loop(std::size_t frames)
{
    roll::PianoRoll r(frames, 31.25);
    for (std::size_t t = 0; t < frames; ++t) {
        for (int p : t % 2 == 0 ? std::vector<int>{60, 64, 67} : std::vector<int>{62, 65, 69}) {
            r.set(t, static_cast<std::size_t>(p - roll::kLowestPitch));
        }
    }
    return r;
}

} // namespace

TEST_CASE("nade_log_prob")
{
    Nade zero(2, 3);
    for (unsigned code = 0; code < 4; ++code) CHECK(nade_log_prob(zero, bits_of(code, 2)) == doctest::Approx(std::log(0.25)));

    nn::Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        Nade n = random_nade(rng, 10, 7);
        CHECK(std::abs(total_probability(n) - 1.0) < 1e-9);
        for (unsigned code : {0u, 1u, 513u, 1023u, 77u}) {
            const Vector v = bits_of(code, 10);
            CHECK(std::abs(nade_log_prob(n, v) - prefix_log_prob(n, v)) < 1e-12);
        }
    }

    Vector bad = Vector::Zero(2);
    bad(1) = 0.5;
    CHECK_THROWS_AS(nade_log_prob(zero, bad), DataError);
    CHECK_THROWS_AS(nade_log_prob(zero, Vector::Zero(3)), DimensionError);
}

TEST_CASE("nade_conditionals agree with the chain rule")
{
    nn::Rng rng(2);
    Nade n = random_nade(rng, 9, 4);
    const Vector v = bits_of(0b101100110, 9);
    const Vector p = nade_conditionals(n, v);
    double lp = 0.0;
    for (Index i = 0; i < 9; ++i) lp += std::log(v(i) != 0.0 ? p(i) : 1.0 - p(i));
    CHECK(lp == doctest::Approx(nade_log_prob(n, v)).epsilon(1e-12));
}

TEST_CASE("nade_sample")
{
    nn::Rng rng(3);
    Nade zero(88, 10);
    Vector mean = Vector::Zero(88);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) mean += nade_sample(zero, rng);
    mean /= draws;
    CHECK((mean.array() - 0.5).abs().maxCoeff() < 0.01);

    Nade biased(4, 3);
    biased.b_v(0) = 20.0;
    int ones = 0;
    for (int i = 0; i < 10000; ++i) ones += nade_sample(biased, rng)(0) == 1.0;
    CHECK(ones > 9990);

    Nade n = random_nade(rng, 8, 5, 1.5);
    std::vector<double> counts(256, 0.0);
    const int samples = 1000000;
    for (int i = 0; i < samples; ++i) {
        const Vector v = nade_sample(n, rng);
        unsigned code = 0;
        for (Index k = 0; k < 8; ++k) code |= v(k) != 0.0 ? 1u << k : 0u;
        counts[code] += 1.0;
    }
    double tv = 0.0;
    for (unsigned code = 0; code < 256; ++code) {
        tv += std::abs(counts[code] / samples - std::exp(nade_log_prob(n, bits_of(code, 8))));
    }
    tv *= 0.5;
    MESSAGE("total variation distance " << tv);
    CHECK(tv < 0.01);
}

TEST_CASE("mlm state and conditionals")
{
    nn::Rng rng(4);
    RnnNadeConfig c{10, 6, 5, 1};
    RnnNade m = random_rnn_nade(rng, c);
    RnnNade copy = m;
    MlmState a = mlm_initial_state(m);
    MlmState b = mlm_initial_state(m);
    CHECK(a.hidden.size() == 1);
    CHECK(a.hidden[0].size() == 6);
    CHECK(a.hidden[0] == b.hidden[0]);
    CHECK(a.last == Vector::Zero(10));
    Nade ca = mlm_conditional(m, a);
    Nade cc = mlm_conditional(copy, mlm_initial_state(copy));
    CHECK(ca.b_v == cc.b_v);
    CHECK(ca.b_h == cc.b_h);
    CHECK(ca.b_v == m.b_v.value.col(0));
    CHECK(ca.b_h == m.b_h.value.col(0));

    // Normalization at arbitrary reachable states.
    MlmState s = a;
    for (int step = 0; step < 4; ++step) {
        s = mlm_advance(m, s, random_frames(rng, 10, 1).col(0));
        CHECK(std::abs(total_probability(mlm_conditional(m, s)) - 1.0) < 1e-9);
        CHECK(m.log_prob(s, bits_of(37, 10)) == nade_log_prob(mlm_conditional(m, s), bits_of(37, 10)));
    }

    // Zero bias maps make every conditional the base NADE.
    RnnNade flat = m;
    flat.W1.value.setZero();
    flat.W2.value.setZero();
    MlmState fs = mlm_advance(flat, mlm_initial_state(flat), bits_of(5, 10));
    CHECK(mlm_conditional(flat, fs).b_v == flat.b_v.value.col(0));
    CHECK(mlm_conditional(flat, fs).b_h == flat.b_h.value.col(0));

    MlmState x = mlm_advance(m, a, bits_of(1, 10));
    MlmState y = mlm_advance(m, a, bits_of(2, 10));
    CHECK(x.hidden[0] != y.hidden[0]);
    CHECK(x.last == bits_of(1, 10));
    CHECK_THROWS_AS(mlm_advance(m, a, Vector::Constant(10, 0.5)), DataError);
}

TEST_CASE("sequence probability: stepwise and unrolled paths agree, chunking is irrelevant")
{
    nn::Rng rng(5);
    for (int layers : {1, 2}) {
        RnnNade m = random_rnn_nade(rng, {12, 7, 6, layers});
        const Matrix seq = random_frames(rng, 12, 11);
        MlmState s = m.initial_state();
        double stepwise = 0.0;
        for (Index t = 0; t < seq.cols(); ++t) {
            stepwise += nade_log_prob(mlm_conditional(m, s), seq.col(t));
            s = mlm_advance(m, s, seq.col(t));
        }
        CHECK(std::abs(stepwise - m.sequence_log_prob(seq)) < 1e-12 * std::max(1.0, std::abs(stepwise)));

        MlmState chunked = m.initial_state();
        chunked = m.advance_sequence(chunked, seq.leftCols(3));
        chunked = m.advance_sequence(chunked, seq.middleCols(3, 5));
        chunked = m.advance_sequence(chunked, seq.rightCols(3));
        MlmState whole = m.advance_sequence(m.initial_state(), seq);
        for (int l = 0; l < layers; ++l) {
            CHECK((chunked.hidden[l] - s.hidden[l]).cwiseAbs().maxCoeff() < 1e-14);
            CHECK((whole.hidden[l] - s.hidden[l]).cwiseAbs().maxCoeff() < 1e-14);
        }
        CHECK((chunked.bias_v - s.bias_v).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("RNN-NADE gradient matches finite differences")
{
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        nn::Rng rng(100 + seed);
        RnnNade m = random_rnn_nade(rng, {6, 8, 5, seed % 3 == 2 ? 2 : 1});
        const Matrix seq = random_frames(rng, 6, 5, 0.4);
        auto params = m.parameters();
        auto r = testing::check_gradients(
            params, [&] { return -m.sequence_log_prob(seq); },
            [&] {
                nn::zero_grads(params);
                m.accumulate_gradient(seq);
            });
        INFO(r.worst);
        CHECK(r.max_rel_error < 1e-4);
        worst = std::max(worst, r.max_rel_error);
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("train_mlm memorizes a two-chord loop")
{
    std::vector<roll::PianoRoll> train{two_chord_loop(200)};
    std::vector<roll::PianoRoll> valid{two_chord_loop(60)};
    MlmTrainingConfig cfg;
    cfg.optimizer = {nn::OptimizerKind::sgd_momentum, 0.05, 0, 0.9, 5.0};
    cfg.max_epochs = 300;
    cfg.sequence_length = 100;
    cfg.batch_size = 1;
    cfg.seed = 7;
    auto result = train_mlm(train, valid, {88, 16, 12, 1}, cfg);
    const auto& log = result.log;
    REQUIRE(!log.epochs.empty());
    const double bits = mean_frame_nll(result.model, valid) / std::log(2.0);
    MESSAGE("epochs " << log.epochs.size() << ", validation NLL " << bits << " bits/frame");
    CHECK(bits < 0.1);

    for (std::size_t i = 1; i < log.epochs.size(); ++i) {
        CHECK(log.epochs[i].best_valid_nll <= log.epochs[i - 1].best_valid_nll);
    }
    const auto& best = log.epochs[static_cast<std::size_t>(log.best_epoch)];
    CHECK(best.valid_nll == best.best_valid_nll);
    CHECK(mean_frame_nll(result.model, valid) == best.valid_nll);
}

TEST_CASE("train_mlm contracts")
{
    MlmTrainingConfig cfg;
    cfg.max_epochs = 3;
    CHECK_THROWS_AS(train_mlm({}, {}, {88, 4, 4, 1}, cfg), DataError);
    std::vector<roll::PianoRoll> mixed{two_chord_loop(10), roll::PianoRoll(10, 100.0)};
    CHECK_THROWS_AS(train_mlm(mixed, {}, {88, 4, 4, 1}, cfg), DataError);

    // Same seed, same bytes.
    std::vector<roll::PianoRoll> train{two_chord_loop(50)};
    auto a = train_mlm(train, {}, {88, 5, 4, 1}, cfg);
    auto b = train_mlm(train, {}, {88, 5, 4, 1}, cfg);
    std::stringstream sa, sb;
    nn::write_container(sa, to_container(a.model));
    nn::write_container(sb, to_container(b.model));
    CHECK(sa.str() == sb.str());
}

TEST_CASE("RNN-NADE container round trip")
{
    nn::Rng rng(9);
    RnnNade m = random_rnn_nade(rng, {88, 9, 7, 2});
    std::stringstream buf;
    nn::write_container(buf, to_container(m));
    RnnNade back = rnn_nade_from_container(nn::read_container(buf));
    const Matrix seq = random_frames(rng, 88, 6, 0.05);
    CHECK(back.sequence_log_prob(seq) == m.sequence_log_prob(seq));
    CHECK(back.config().layers == 2);

    auto container = to_container(m);
    container.header = R"({"model":"dnn"})";
    CHECK_THROWS_AS(rnn_nade_from_container(container), FormatError);
}
