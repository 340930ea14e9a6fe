#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"

#include "gradcheck.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/numerics/layers.hpp"
#include "pianoscribe/numerics/loss.hpp"
#include "pianoscribe/numerics/optimizer.hpp"
#include "pianoscribe/numerics/serialize.hpp"

using namespace pianoscribe;
using namespace pianoscribe::nn;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0)
{
    Matrix m(r, c);
    fill_uniform(m, scale, rng);
    return m;
}

double scalar_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Naive valid cross-correlation + activation + max pool on one sample.
std::vector<std::vector<std::vector<double>>> naive_conv(const std::vector<std::vector<std::vector<double>>>& x,
                                                         const ConvLayer& layer)
{
    const auto in_h = static_cast<Index>(x[0].size());
    const auto in_w = static_cast<Index>(x[0][0].size());
    const Index oh = in_h - layer.kernel_h + 1;
    const Index ow = in_w - layer.kernel_w + 1;
    std::vector<std::vector<std::vector<double>>> act(
        static_cast<std::size_t>(layer.out_channels),
        std::vector<std::vector<double>>(static_cast<std::size_t>(oh), std::vector<double>(static_cast<std::size_t>(ow))));
    for (Index j = 0; j < layer.out_channels; ++j) {
        for (Index a = 0; a < oh; ++a) {
            for (Index b = 0; b < ow; ++b) {
                double s = layer.bias.value(j, 0);
                for (Index r = 0; r < layer.in_channels; ++r) {
                    for (Index u = 0; u < layer.kernel_h; ++u) {
                        for (Index v = 0; v < layer.kernel_w; ++v) {
                            const Index k = (r * layer.kernel_h + u) * layer.kernel_w + v;
                            s += layer.kernels.value(j, k) * x[r][a + u][b + v];
                        }
                    }
                }
                act[j][a][b] = std::tanh(s);
            }
        }
    }
    const Index ph = oh / layer.pool_h;
    const Index pw = ow / layer.pool_w;
    std::vector<std::vector<std::vector<double>>> out(
        static_cast<std::size_t>(layer.out_channels),
        std::vector<std::vector<double>>(static_cast<std::size_t>(ph), std::vector<double>(static_cast<std::size_t>(pw))));
    for (Index j = 0; j < layer.out_channels; ++j) {
        for (Index i = 0; i < ph; ++i) {
            for (Index k = 0; k < pw; ++k) {
                double m = -1e300;
                for (Index u = 0; u < layer.pool_h; ++u) {
                    for (Index v = 0; v < layer.pool_w; ++v) {
                        m = std::max(m, act[j][i * layer.pool_h + u][k * layer.pool_w + v]);
                    }
                }
                out[j][i][k] = m;
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("dense_forward trivial cases")
{
    DenseLayer zero(3, 4, Activation::sigmoid);
    Vector x(3);
    x << 0.3, -2.0, 7.0;
    Vector y = dense_forward(x, zero);
    REQUIRE(y.size() == 4);
    for (Index i = 0; i < 4; ++i) {
        CHECK(y(i) == 0.5);
    }

    DenseLayer ident(2, 2, Activation::linear);
    ident.weight.value = Matrix::Identity(2, 2);
    Vector x2(2);
    x2 << 1.0, 2.0;
    Vector y2 = dense_forward(x2, ident);
    CHECK(y2(0) == 1.0);
    CHECK(y2(1) == 2.0);
}

TEST_CASE("dense_forward matches scalar loop")
{
    Rng rng(7);
    DenseLayer layer(2, 3, Activation::sigmoid);
    layer.weight.value = random_matrix(3, 2, rng);
    layer.bias.value = random_matrix(3, 1, rng);
    Vector x = random_matrix(2, 1, rng);
    Vector y = dense_forward(x, layer);
    for (Index i = 0; i < 3; ++i) {
        double s = layer.bias.value(i, 0);
        for (Index j = 0; j < 2; ++j) {
            s += layer.weight.value(i, j) * x(j);
        }
        CHECK(std::abs(y(i) - scalar_sigmoid(s)) < 1e-12);
    }
}

TEST_CASE("dense_forward rejects wrong input size")
{
    DenseLayer layer(3, 2, Activation::sigmoid);
    CHECK_THROWS_AS(dense_forward(Vector::Zero(4), layer), DimensionError);
}

TEST_CASE("recurrent_step cases")
{
    Rng rng(11);
    RecurrentLayer layer(3, 2);
    layer.input_weight.value = random_matrix(2, 3, rng);
    layer.bias.value = random_matrix(2, 1, rng);

    SUBCASE("zero recurrence reduces to a tanh dense layer")
    {
        DenseLayer dense(3, 2, Activation::tanh);
        dense.weight.value = layer.input_weight.value;
        dense.bias.value = layer.bias.value;
        Vector x = random_matrix(3, 1, rng);
        Vector h = random_matrix(2, 1, rng);
        CHECK((recurrent_step(x, h, layer) - dense_forward(x, dense)).norm() < 1e-15);
    }

    SUBCASE("identity recurrence with zero input")
    {
        RecurrentLayer one(2, 1);
        one.input_weight.value = random_matrix(1, 2, rng);
        one.recurrent_weight.value = Matrix::Identity(1, 1);
        Vector h(1);
        h << 0.1;
        CHECK(recurrent_step(Vector::Zero(2), h, one)(0) == doctest::Approx(std::tanh(0.1)).epsilon(1e-15));
    }

    SUBCASE("two unrolled steps match a scalar loop")
    {
        layer.recurrent_weight.value = random_matrix(2, 2, rng);
        Matrix xs = random_matrix(3, 2, rng);
        Matrix hs = layer.forward_sequence(xs, Vector::Zero(2));
        std::vector<double> prev{0.0, 0.0};
        for (Index t = 0; t < 2; ++t) {
            std::vector<double> next(2);
            for (Index i = 0; i < 2; ++i) {
                double s = layer.bias.value(i, 0);
                for (Index j = 0; j < 3; ++j) s += layer.input_weight.value(i, j) * xs(j, t);
                for (Index j = 0; j < 2; ++j) s += layer.recurrent_weight.value(i, j) * prev[j];
                next[i] = std::tanh(s);
                CHECK(std::abs(hs(i, t) - next[i]) < 1e-12);
            }
            prev = next;
        }
        // the single-step API agrees with the sequence API
        Vector h1 = recurrent_step(xs.col(0), Vector::Zero(2), layer);
        CHECK((recurrent_step(xs.col(1), h1, layer) - hs.col(1)).norm() < 1e-15);
    }

    CHECK_THROWS_AS(recurrent_step(Vector::Zero(3), Vector::Zero(5), layer), DimensionError);
}

TEST_CASE("conv_forward trivial cases")
{
    Rng rng(3);
    FeatureMaps x(1, 4, 6);
    x.data = random_matrix(1, 24, rng);

    ConvLayer ident(1, 1, 1, 1, 1, 1, Activation::linear);
    ident.kernels.value(0, 0) = 1.0;
    FeatureMaps y = conv_forward(x, ident);
    CHECK(y.height == 4);
    CHECK(y.width == 6);
    CHECK((y.data - x.data).norm() == 0.0);

    ConvLayer relu(1, 2, 2, 2, 1, 1, Activation::relu);
    relu.kernels.value.setConstant(1.0);
    FeatureMaps neg(1, 4, 6);
    neg.data.setConstant(-1.0);
    FeatureMaps z = conv_forward(neg, relu);
    CHECK(z.data.cwiseAbs().maxCoeff() == 0.0);

    ConvLayer big(1, 1, 5, 2, 1, 1);
    CHECK_THROWS_AS(conv_forward(x, big), DimensionError);
}

TEST_CASE("conv_forward matches a naive quadruple loop")
{
    Rng rng(5);
    for (Index pool_w : {Index{1}, Index{3}}) {
        ConvLayer layer(2, 3, 3, 3, 1, pool_w);
        layer.kernels.value = random_matrix(3, 18, rng);
        layer.bias.value = random_matrix(3, 1, rng);
        FeatureMaps x(2, 5, 5);
        std::vector<std::vector<std::vector<double>>> nx(2, std::vector<std::vector<double>>(5, std::vector<double>(5)));
        for (Index r = 0; r < 2; ++r)
            for (Index a = 0; a < 5; ++a)
                for (Index b = 0; b < 5; ++b) {
                    const double v = std::uniform_real_distribution<double>(-1, 1)(rng);
                    x.at(0, r, a, b) = v;
                    nx[r][a][b] = v;
                }
        FeatureMaps y = conv_forward(x, layer);
        auto oracle = naive_conv(nx, layer);
        REQUIRE(y.height == 3);
        REQUIRE(y.width == 3 / pool_w);
        for (Index j = 0; j < 3; ++j)
            for (Index a = 0; a < y.height; ++a)
                for (Index b = 0; b < y.width; ++b) {
                    CHECK(std::abs(y.at(0, j, a, b) - oracle[j][a][b]) < 1e-12);
                }
    }
}

TEST_CASE("pooling truncates trailing cells and (1,1) pooling is a no-op")
{
    ConvLayer layer(1, 1, 1, 1, 1, 3, Activation::linear);
    layer.kernels.value(0, 0) = 1.0;
    FeatureMaps x(1, 1, 7);
    for (Index b = 0; b < 7; ++b) x.at(0, 0, 0, b) = static_cast<double>(b == 6 ? 100 : b);
    FeatureMaps y = conv_forward(x, layer);
    REQUIRE(y.width == 2);
    CHECK(y.at(0, 0, 0, 0) == 2.0);
    CHECK(y.at(0, 0, 0, 1) == 5.0);  // cell 6 is dropped

    Rng rng(9);
    ConvLayer a(1, 2, 2, 3, 1, 1);
    a.init(rng);
    FeatureMaps in(1, 4, 8);
    in.data = random_matrix(1, 32, rng);
    ConvLayer::Cache cache;
    FeatureMaps pooled = a.forward(in, &cache);
    CHECK((pooled.data - cache.activated).norm() == 0.0);
}

TEST_CASE("backprop: single sigmoid output bias gradient")
{
    DenseLayer out(3, 1, Activation::sigmoid);
    Matrix x = Matrix::Random(3, 1);
    Matrix target = Matrix::Ones(1, 1);
    Matrix logits = out.pre_activation(x);
    Matrix grad_pre = sigmoid(logits) - target;  // batch of one
    out.backward_pre(x, grad_pre);
    CHECK(out.bias.grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("backprop matches finite differences for dense, recurrent and conv stacks")
{
    Rng rng(21);
    for (int seed = 0; seed < 5; ++seed) {
        rng.seed(static_cast<std::uint64_t>(seed + 100));

        DenseLayer h1(4, 5, Activation::sigmoid);
        DenseLayer h2(5, 3, Activation::tanh);
        DenseLayer out(3, 2, Activation::sigmoid);
        h1.init(rng);
        h2.init(rng);
        out.init(rng);
        Matrix x = random_matrix(4, 6, rng);
        Matrix y = (random_matrix(2, 6, rng).array() > 0).cast<double>().matrix();
        auto loss = [&] {
            return bernoulli_nll_from_logits(out.pre_activation(h2.forward(h1.forward(x))), y) / 6.0;
        };
        auto grad = [&] {
            for (auto* l : {&h1, &h2, &out}) zero_grads(l->parameters());
            Matrix a1 = h1.forward(x);
            Matrix a2 = h2.forward(a1);
            Matrix g = (sigmoid(out.pre_activation(a2)) - y) / 6.0;
            Matrix g2 = out.backward_pre(a2, g);
            Matrix g1 = h2.backward(a1, a2, g2);
            h1.backward(x, a1, g1);
        };
        ParameterList params;
        for (auto* l : {&h1, &h2, &out})
            for (auto* p : l->parameters()) params.push_back(p);
        auto dense_res = testing::check_gradients(params, loss, grad);
        CHECK_MESSAGE(dense_res.max_rel_error < 1e-4, dense_res.worst);

        RecurrentLayer rec(3, 4);
        rec.init(rng);
        rec.recurrent_weight.value = random_matrix(4, 4, rng, 0.5);
        DenseLayer rout(4, 2, Activation::sigmoid);
        rout.init(rng);
        Matrix xs = random_matrix(3, 7, rng);
        Matrix ys = (random_matrix(2, 7, rng).array() > 0).cast<double>().matrix();
        Vector h0 = Vector::Zero(4);
        auto rloss = [&] { return bernoulli_nll_from_logits(rout.pre_activation(rec.forward_sequence(xs, h0)), ys); };
        auto rgrad = [&] {
            zero_grads(rec.parameters());
            zero_grads(rout.parameters());
            Matrix hs = rec.forward_sequence(xs, h0);
            Matrix g = sigmoid(rout.pre_activation(hs)) - ys;
            Matrix gh = rout.backward_pre(hs, g);
            rec.backward_sequence(xs, hs, h0, gh);
        };
        ParameterList rparams = rec.parameters();
        for (auto* p : rout.parameters()) rparams.push_back(p);
        auto rec_res = testing::check_gradients(rparams, rloss, rgrad);
        CHECK_MESSAGE(rec_res.max_rel_error < 1e-4, rec_res.worst);

        ConvLayer c1(1, 2, 2, 3, 1, 2);
        ConvLayer c2(2, 2, 2, 2, 1, 1, Activation::tanh);
        c1.init(rng);
        c2.init(rng);
        FeatureMaps in(1, 4, 12, 2);
        in.data = random_matrix(1, 2 * 48, rng);
        const Index flat = 2 * c2.output_height(c1.output_height(4)) * c2.output_width(c1.output_width(12));
        DenseLayer cout(flat, 3, Activation::sigmoid);
        cout.init(rng);
        Matrix cy = (random_matrix(3, 2, rng).array() > 0).cast<double>().matrix();
        auto flatten = [&](const FeatureMaps& m) {
            Matrix f(flat, m.count);
            for (Index n = 0; n < m.count; ++n)
                for (Index c = 0; c < m.channels; ++c)
                    for (Index k = 0; k < m.cells(); ++k) f(c * m.cells() + k, n) = m.data(c, n * m.cells() + k);
            return f;
        };
        auto closs = [&] {
            return bernoulli_nll_from_logits(cout.pre_activation(flatten(c2.forward(c1.forward(in)))), cy);
        };
        auto cgrad = [&] {
            for (auto* l : {&c1, &c2}) zero_grads(l->parameters());
            zero_grads(cout.parameters());
            ConvLayer::Cache k1, k2;
            FeatureMaps m1 = c1.forward(in, &k1);
            FeatureMaps m2 = c2.forward(m1, &k2);
            Matrix f = flatten(m2);
            Matrix g = sigmoid(cout.pre_activation(f)) - cy;
            Matrix gf = cout.backward_pre(f, g);
            FeatureMaps gm2(m2.channels, m2.height, m2.width, m2.count);
            for (Index n = 0; n < m2.count; ++n)
                for (Index c = 0; c < m2.channels; ++c)
                    for (Index k = 0; k < m2.cells(); ++k) gm2.data(c, n * m2.cells() + k) = gf(c * m2.cells() + k, n);
            FeatureMaps gm1 = c2.backward(k2, gm2);
            c1.backward(k1, gm1);
        };
        ParameterList cparams = c1.parameters();
        for (auto* p : c2.parameters()) cparams.push_back(p);
        for (auto* p : cout.parameters()) cparams.push_back(p);
        auto conv_res = testing::check_gradients(cparams, closs, cgrad);
        CHECK_MESSAGE(conv_res.max_rel_error < 1e-4, conv_res.worst);
    }
}

TEST_CASE("backprop: targets equal to outputs give a vanishing gradient")
{
    Rng rng(4);
    DenseLayer out(5, 3, Activation::sigmoid);
    out.init(rng);
    Matrix x = random_matrix(5, 4, rng);
    Matrix p = sigmoid(out.pre_activation(x));
    out.backward_pre(x, (p - p) / 4.0);
    CHECK(gradient_norm(out.parameters()) < 1e-8);
}

TEST_CASE("non-finite values are reported with their origin")
{
    Matrix m = Matrix::Zero(2, 2);
    m(1, 1) = std::nan("");
    CHECK_THROWS_WITH_AS(require_finite(m, "layer 2 (dense)"), doctest::Contains("layer 2 (dense)"), NumericalError);
}

TEST_CASE("clip_gradients")
{
    Parameter g("g", 2, 1);
    g.grad << 3.0, 4.0;
    clip_gradients({&g}, 5.0);
    CHECK(g.grad(0, 0) == 3.0);
    CHECK(g.grad(1, 0) == 4.0);

    g.grad << 6.0, 8.0;
    clip_gradients({&g}, 5.0);
    CHECK(g.grad(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(g.grad(1, 0) == doctest::Approx(4.0).epsilon(1e-15));

    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        Parameter a("a", 3, 4);
        Parameter b("b", 5, 1);
        a.grad = random_matrix(3, 4, rng, trial % 2 ? 0.5 : 6.0);
        b.grad = random_matrix(5, 1, rng, 2.0);
        const double pre = gradient_norm({&a, &b});
        clip_gradients({&a, &b}, 5.0);
        CHECK(std::abs(gradient_norm({&a, &b}) - std::min(pre, 5.0)) < 1e-12);
        Matrix once = a.grad;
        clip_gradients({&a, &b}, 5.0);
        CHECK((a.grad - once).norm() < 1e-12);
    }
    CHECK_THROWS_AS(clip_gradients({&g}, 0.0), ConfigError);
}

TEST_CASE("optimizer_update")
{
    SUBCASE("zero gradient with zero velocity leaves parameters unchanged")
    {
        Parameter p("p", 2, 2);
        p.value << 1, 2, 3, 4;
        Matrix before = p.value;
        Optimizer opt({});
        opt.step({&p});
        CHECK(p.value == before);
    }

    SUBCASE("linear schedule reaches zero at the horizon")
    {
        OptimizerConfig cfg;
        cfg.learning_rate = 0.01;
        cfg.decay_horizon = 10;
        CHECK(scheduled_learning_rate(cfg, 0) == 0.01);
        CHECK(scheduled_learning_rate(cfg, 5) == doctest::Approx(0.005));
        CHECK(scheduled_learning_rate(cfg, 10) == 0.0);
        CHECK(scheduled_learning_rate(cfg, 50) == 0.0);

        cfg.momentum = 0.0;
        Optimizer opt(cfg);
        Parameter p("p", 1, 1);
        p.grad(0, 0) = 1.0;
        for (int i = 0; i < 10; ++i) opt.step({&p});
        const double frozen = p.value(0, 0);
        opt.step({&p});
        CHECK(p.value(0, 0) == frozen);
    }

    SUBCASE("adadelta on a quadratic")
    {
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::adadelta;
        cfg.learning_rate = 1.0;
        cfg.decay_horizon = 0;
        Optimizer opt(cfg);
        Parameter x("x", 1, 1);
        x.value(0, 0) = 1.0;
        const double initial = 0.5;
        std::vector<double> losses;
        for (int i = 0; i < 200; ++i) {
            x.grad(0, 0) = x.value(0, 0);
            opt.step({&x});
            losses.push_back(0.5 * x.value(0, 0) * x.value(0, 0));
        }
        for (std::size_t i = 20; i + 1 < losses.size(); ++i) {
            CHECK(losses[i + 1] < losses[i]);
        }
        CHECK(losses.back() < initial / 10.0);
    }

    SUBCASE("determinism")
    {
        auto run = [] {
            Rng rng(42);
            DenseLayer layer(4, 3, Activation::sigmoid);
            layer.init(rng);
            Optimizer opt({});
            for (int i = 0; i < 25; ++i) {
                zero_grads(layer.parameters());
                Matrix x = random_matrix(4, 8, rng);
                Matrix y = (random_matrix(3, 8, rng).array() > 0).cast<double>().matrix();
                layer.backward_pre(x, (sigmoid(layer.pre_activation(x)) - y) / 8.0);
                opt.step(layer.parameters());
            }
            return layer.weight.value;
        };
        Matrix a = run();
        Matrix b = run();
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
    }
}

TEST_CASE("PSNN container round trip")
{
    Rng rng(1);
    ModelContainer model;
    model.header = R"({"kind":"test"})";
    Matrix w = random_matrix(3, 4, rng);
    model.layers.push_back({LayerTag::dense, {to_blob(w), to_blob(Matrix::Ones(3, 1))}});
    model.layers.push_back({LayerTag::conv, {to_blob(random_matrix(2, 6, rng), {2, 1, 2, 3})}});

    std::stringstream buf;
    write_container(buf, model);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "PSNN");

    ModelContainer back = read_container(buf);
    CHECK(back.header == model.header);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.layers[1].tensors[0].shape == std::vector<std::uint64_t>{2, 1, 2, 3});
    CHECK(from_blob(back.layers[0].tensors[0], 3, 4) == w);

    std::stringstream bad("PSXX\x01\x00\x00\x00");
    CHECK_THROWS_AS(read_container(bad), FormatError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_container(truncated), FormatError);
}
