#include "pianoscribe/mlm/nade.hpp"

#include <cmath>
#include <string>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::mlm {

using nn::Index;
using nn::Matrix;
using nn::Vector;

namespace {

// log sigmoid(x), stable for large |x|.
double log_sigmoid(double x)
{
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void check_shapes(const Matrix& W, const Matrix& V, const Vector& b_h, const Vector& b_v, const Vector& v)
{
    if (V.rows() != W.cols() || V.cols() != W.rows() || b_h.size() != W.rows() || b_v.size() != W.cols()) {
        throw DimensionError("inconsistent NADE parameter shapes");
    }
    if (v.size() != W.cols()) {
        throw DimensionError("NADE expects " + std::to_string(W.cols()) + " visible units, got " +
                             std::to_string(v.size()));
    }
    for (Index i = 0; i < v.size(); ++i) {
        if (v(i) != 0.0 && v(i) != 1.0) {
            throw DataError("NADE input must be binary; entry " + std::to_string(i) + " is " + std::to_string(v(i)));
        }
    }
}

// Visits the visible units in blocks that share one hidden vector: the hidden
// pre-activation only changes after an active unit. `visit(first, count, h)`
// sees units first..first+count-1.
template <typename Visit>
void for_each_block(const Matrix& W, const Vector& b_h, const Vector& v, Visit&& visit)
{
    const Index d = W.cols();
    Vector a = b_h;
    Index i = 0;
    while (i < d) {
        Index j = i;
        while (j < d && v(j) == 0.0) {
            ++j;
        }
        const Index last = j < d ? j : d - 1;
        const Vector h = a.unaryExpr([](double z) { return nn::sigmoid(z); });
        visit(i, last - i + 1, h);
        if (j < d) {
            a += W.col(j);
        }
        i = last + 1;
    }
}

} // namespace

Nade::Nade(Index visible, Index hidden)
    : W(Matrix::Zero(hidden, visible)), V(Matrix::Zero(visible, hidden)), b_h(Vector::Zero(hidden)),
      b_v(Vector::Zero(visible))
{
}

void Nade::init(nn::Rng& rng)
{
    const double limit = nn::glorot_limit(visible(), hidden());
    nn::fill_uniform(W, limit, rng);
    nn::fill_uniform(V, limit, rng);
    b_h.setZero();
    b_v.setZero();
}

double nade_log_prob(const Matrix& W, const Matrix& V, const Vector& b_h, const Vector& b_v, const Vector& v)
{
    check_shapes(W, V, b_h, b_v, v);
    double lp = 0.0;
    for_each_block(W, b_h, v, [&](Index first, Index count, const Vector& h) {
        const Vector logits = V.middleRows(first, count) * h + b_v.segment(first, count);
        for (Index k = 0; k < count; ++k) {
            const double z = logits(k);
            lp += v(first + k) != 0.0 ? log_sigmoid(z) : log_sigmoid(-z);
        }
    });
    return lp;
}

double nade_log_prob(const Nade& n, const Vector& v)
{
    return nade_log_prob(n.W, n.V, n.b_h, n.b_v, v);
}

Vector nade_conditionals(const Nade& n, const Vector& v)
{
    check_shapes(n.W, n.V, n.b_h, n.b_v, v);
    Vector p(v.size());
    for_each_block(n.W, n.b_h, v, [&](Index first, Index count, const Vector& h) {
        const Vector logits = n.V.middleRows(first, count) * h + n.b_v.segment(first, count);
        for (Index k = 0; k < count; ++k) {
            p(first + k) = nn::sigmoid(logits(k));
        }
    });
    return p;
}

Vector nade_sample(const Nade& n, nn::Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector v = Vector::Zero(n.visible());
    Vector a = n.b_h;
    Vector h = a.unaryExpr([](double z) { return nn::sigmoid(z); });
    for (Index i = 0; i < n.visible(); ++i) {
        const double p = nn::sigmoid(n.V.row(i).dot(h) + n.b_v(i));
        if (u(rng) < p) {
            v(i) = 1.0;
            a += n.W.col(i);
            h = a.unaryExpr([](double z) { return nn::sigmoid(z); });
        }
    }
    return v;
}

double nade_nll_gradient(const Matrix& W, const Matrix& V, const Vector& b_h, const Vector& b_v, const Vector& v,
                         NadeGradients grads)
{
    check_shapes(W, V, b_h, b_v, v);
    const Index d = W.cols();
    const Index hid = W.rows();
    Matrix hs(hid, d);
    Vector a = b_h;
    for (Index i = 0; i < d; ++i) {
        hs.col(i) = a.unaryExpr([](double z) { return nn::sigmoid(z); });
        if (v(i) != 0.0) {
            a += W.col(i);
        }
    }
    const Vector logits = (V.cwiseProduct(hs.transpose())).rowwise().sum() + b_v;
    double nll = 0.0;
    Vector delta(d);
    for (Index i = 0; i < d; ++i) {
        const double z = logits(i);
        nll -= v(i) != 0.0 ? log_sigmoid(z) : log_sigmoid(-z);
        delta(i) = nn::sigmoid(z) - v(i);
    }

    grads.b_v += delta;
    grads.V += delta.asDiagonal() * hs.transpose();
    // dL/da_i for every step i.
    const Matrix da = (V.transpose() * delta.asDiagonal()).cwiseProduct(hs.cwiseProduct((1.0 - hs.array()).matrix()));
    grads.b_h += da.rowwise().sum();
    // W[:, j] feeds every a_i with i > j.
    Vector suffix = Vector::Zero(hid);
    for (Index j = d - 1; j >= 0; --j) {
        if (v(j) != 0.0) {
            grads.W.col(j) += suffix;
        }
        suffix += da.col(j);
    }
    return nll;
}

} // namespace pianoscribe::mlm
