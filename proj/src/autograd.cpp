#include "matforge/autograd.hpp"

#include <cmath>

namespace matforge {

// ---- ParamStore -------------------------------------------------------------

int ParamStore::add(const std::string& name, int rows, int cols, double stddev, Rng& rng) {
    if (index_.count(name)) throw Error("duplicate-tensor", "tensor already registered: " + name);
    Slot s;
    s.name = name;
    s.value = Mat::Zero(rows, cols);
    if (stddev > 0.0)
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) s.value(r, c) = rng.normal(0.0, stddev);
    s.grad = Mat::Zero(rows, cols);
    const int id = int(slots_.size());
    slots_.push_back(std::move(s));
    index_[name] = id;
    return id;
}

int ParamStore::add_constant(const std::string& name, int rows, int cols, double fill) {
    if (index_.count(name)) throw Error("duplicate-tensor", "tensor already registered: " + name);
    Slot s;
    s.name = name;
    s.value = Mat::Constant(rows, cols, fill);
    s.grad = Mat::Zero(rows, cols);
    const int id = int(slots_.size());
    slots_.push_back(std::move(s));
    index_[name] = id;
    return id;
}

int ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

void ParamStore::zero_grad() {
    for (Slot& s : slots_) s.grad.setZero();
}

long long ParamStore::scalar_count() const {
    long long n = 0;
    for (const Slot& s : slots_) n += s.value.size();
    return n;
}

std::vector<Mat> ParamStore::snapshot_values() const {
    std::vector<Mat> out;
    out.reserve(slots_.size());
    for (const Slot& s : slots_) out.push_back(s.value);
    return out;
}

void ParamStore::restore_values(const std::vector<Mat>& values) {
    if (values.size() != slots_.size())
        throw Error("checkpoint-mismatch", "snapshot tensor count differs");
    for (size_t i = 0; i < slots_.size(); ++i) slots_[i].value = values[i];
}

// ---- Tape -------------------------------------------------------------------

int Tape::push(Mat value, std::function<void(Tape&, Node&)> back) {
    Node n;
    n.value = std::move(value);
    if (with_grad_) {
        n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::constant(Mat m) { return push(std::move(m), nullptr); }

int Tape::leaf(ParamStore& store, int slot_id) {
    const int id = push(store.slot(slot_id).value, nullptr);
    nodes_[size_t(id)].store = &store;
    nodes_[size_t(id)].slot_id = slot_id;
    return id;
}

int Tape::add(int a, int b) {
    return push(value(a) + value(b), [a, b](Tape& t, Node& n) {
        t.grad(a) += n.grad;
        t.grad(b) += n.grad;
    });
}

int Tape::sub(int a, int b) {
    return push(value(a) - value(b), [a, b](Tape& t, Node& n) {
        t.grad(a) += n.grad;
        t.grad(b) -= n.grad;
    });
}

int Tape::add_rowvec(int a, int r) {
    Mat out = value(a);
    out.rowwise() += value(r).row(0);
    return push(std::move(out), [a, r](Tape& t, Node& n) {
        t.grad(a) += n.grad;
        t.grad(r).row(0) += n.grad.colwise().sum();
    });
}

int Tape::scale(int a, double c) {
    return push(value(a) * c, [a, c](Tape& t, Node& n) { t.grad(a) += n.grad * c; });
}

int Tape::hadamard(int a, int b) {
    return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, Node& n) {
        t.grad(a) += n.grad.cwiseProduct(t.value(b));
        t.grad(b) += n.grad.cwiseProduct(t.value(a));
    });
}

int Tape::matmul(int a, int b) {
    return push(value(a) * value(b), [a, b](Tape& t, Node& n) {
        t.grad(a) += n.grad * t.value(b).transpose();
        t.grad(b) += t.value(a).transpose() * n.grad;
    });
}

int Tape::transpose(int a) {
    return push(value(a).transpose(), [a](Tape& t, Node& n) { t.grad(a) += n.grad.transpose(); });
}

int Tape::gelu(int a) {
    const Mat& x = value(a);
    Mat out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
    return push(std::move(out), [a](Tape& t, Node& n) {
        const Mat& x = t.value(a);
        Mat d = x.unaryExpr([](double v) {
            const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014327;
            return cdf + v * pdf;
        });
        t.grad(a) += n.grad.cwiseProduct(d);
    });
}

int Tape::tanh_op(int a) {
    Mat out = value(a).array().tanh().matrix();
    return push(std::move(out), [a](Tape& t, Node& n) {
        t.grad(a) += n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix());
    });
}

int Tape::layernorm(int a, int gamma, int beta) {
    const Mat& x = value(a);
    const int R = int(x.rows()), D = int(x.cols());
    const double eps = 1e-5;
    Mat xhat(R, D), out(R, D);
    Eigen::VectorXd inv_s(R);
    for (int r = 0; r < R; ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        inv_s(r) = is;
        xhat.row(r) = (x.row(r).array() - mu) * is;
        out.row(r) =
            xhat.row(r).cwiseProduct(value(gamma).row(0)) + value(beta).row(0);
    }
    return push(std::move(out), [a, gamma, beta, xhat, inv_s](Tape& t, Node& n) {
        const int R = int(n.value.rows()), D = int(n.value.cols());
        for (int r = 0; r < R; ++r) {
            t.grad(gamma).row(0) += n.grad.row(r).cwiseProduct(xhat.row(r));
            t.grad(beta).row(0) += n.grad.row(r);
            const Eigen::RowVectorXd g = n.grad.row(r).cwiseProduct(t.value(gamma).row(0));
            const double gm = g.mean();
            const double gxm = g.cwiseProduct(xhat.row(r)).mean();
            t.grad(a).row(r) +=
                inv_s(r) * (g.array() - gm - xhat.row(r).array() * gxm).matrix();
        }
        (void)D;
    });
}

int Tape::softmax_rows(int a) {
    const Mat& x = value(a);
    Mat out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        Eigen::RowVectorXd e = (x.row(r).array() - mx).exp();
        out.row(r) = e / e.sum();
    }
    return push(std::move(out), [a](Tape& t, Node& n) {
        const Mat& y = n.value;
        for (int r = 0; r < y.rows(); ++r) {
            const double dot = n.grad.row(r).cwiseProduct(y.row(r)).sum();
            t.grad(a).row(r) += y.row(r).cwiseProduct((n.grad.row(r).array() - dot).matrix());
        }
    });
}

int Tape::gather_rows(int table, std::vector<int> ids) {
    const Mat& tab = value(table);
    Mat out(int(ids.size()), tab.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tab.rows())
            throw Error("index-out-of-range", "gather_rows id " + std::to_string(ids[i]) +
                                                  " of table with " + std::to_string(tab.rows()) +
                                                  " rows");
        out.row(int(i)) = tab.row(ids[i]);
    }
    return push(std::move(out), [table, ids = std::move(ids)](Tape& t, Node& n) {
        for (size_t i = 0; i < ids.size(); ++i)
            t.grad(table).row(ids[i]) += n.grad.row(int(i));
    });
}

int Tape::col_block(int a, int start, int len) {
    Mat out = value(a).middleCols(start, len);
    return push(std::move(out), [a, start, len](Tape& t, Node& n) {
        t.grad(a).middleCols(start, len) += n.grad;
    });
}

int Tape::concat_cols(const std::vector<int>& xs) {
    int cols = 0;
    for (int x : xs) cols += int(value(x).cols());
    Mat out(value(xs[0]).rows(), cols);
    int at = 0;
    for (int x : xs) {
        out.middleCols(at, int(value(x).cols())) = value(x);
        at += int(value(x).cols());
    }
    return push(std::move(out), [xs](Tape& t, Node& n) {
        int at = 0;
        for (int x : xs) {
            const int w = int(t.value(x).cols());
            t.grad(x) += n.grad.middleCols(at, w);
            at += w;
        }
    });
}

int Tape::concat_rows(const std::vector<int>& xs) {
    int rows = 0;
    for (int x : xs) rows += int(value(x).rows());
    Mat out(rows, value(xs[0]).cols());
    int at = 0;
    for (int x : xs) {
        out.middleRows(at, int(value(x).rows())) = value(x);
        at += int(value(x).rows());
    }
    return push(std::move(out), [xs](Tape& t, Node& n) {
        int at = 0;
        for (int x : xs) {
            const int h = int(t.value(x).rows());
            t.grad(x) += n.grad.middleRows(at, h);
            at += h;
        }
    });
}

int Tape::row(int a, int r) {
    Mat out = value(a).row(r);
    return push(std::move(out), [a, r](Tape& t, Node& n) { t.grad(a).row(r) += n.grad.row(0); });
}

int Tape::softmax_ce_mean(int logits, std::vector<int> targets) {
    const Mat& x = value(logits);
    if (int(targets.size()) != x.rows())
        throw Error("shape-mismatch", "one target per logits row required");
    Mat probs(x.rows(), x.cols());
    double loss = 0.0;
    int counted = 0;
    for (int r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        Eigen::RowVectorXd e = (x.row(r).array() - mx).exp();
        probs.row(r) = e / e.sum();
        if (targets[size_t(r)] < 0) continue;
        if (targets[size_t(r)] >= x.cols())
            throw Error("index-out-of-range", "cross-entropy target out of vocabulary");
        loss -= std::log(std::max(probs(r, targets[size_t(r)]), 1e-300));
        ++counted;
    }
    if (counted > 0) loss /= counted;
    Mat out(1, 1);
    out(0, 0) = loss;
    return push(std::move(out),
                [logits, targets = std::move(targets), probs, counted](Tape& t, Node& n) {
                    if (counted == 0) return;
                    const double g = n.grad(0, 0) / counted;
                    for (int r = 0; r < probs.rows(); ++r) {
                        if (targets[size_t(r)] < 0) continue;
                        t.grad(logits).row(r) += g * probs.row(r);
                        t.grad(logits)(r, targets[size_t(r)]) -= g;
                    }
                });
}

void Tape::backward(int loss_id) {
    if (!with_grad_) throw Error("no-grad", "backward on a value-only tape");
    Node& loss = nodes_[size_t(loss_id)];
    if (loss.value.rows() != 1 || loss.value.cols() != 1)
        throw Error("shape-mismatch", "backward expects a scalar loss");
    loss.grad(0, 0) = 1.0;
    for (int i = loss_id; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        if (n.back) n.back(*this, n);
        if (n.store) n.store->slot(n.slot_id).grad += n.grad;
    }
}

// ---- Adam -------------------------------------------------------------------

void AdamOptimizer::step(ParamStore& store) {
    if (m_.empty()) {
        for (int i = 0; i < store.size(); ++i) {
            m_.push_back(Mat::Zero(store.slot(i).value.rows(), store.slot(i).value.cols()));
            v_.push_back(Mat::Zero(store.slot(i).value.rows(), store.slot(i).value.cols()));
        }
    }
    if (int(m_.size()) != store.size())
        throw Error("shape-mismatch", "optimizer bound to a different store");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    for (int i = 0; i < store.size(); ++i) {
        auto& s = store.slot(i);
        m_[size_t(i)] = beta1_ * m_[size_t(i)] + (1.0 - beta1_) * s.grad;
        v_[size_t(i)] = beta2_ * v_[size_t(i)] + (1.0 - beta2_) * s.grad.cwiseProduct(s.grad);
        const Mat mhat = m_[size_t(i)] / c1;
        const Mat vhat = v_[size_t(i)] / c2;
        s.value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
    }
}

// ---- gradient check ---------------------------------------------------------

GradCheckResult gradient_check(ParamStore& store, const std::function<double(Tape&)>& loss,
                               int samples, double eps, double rel_tol, uint64_t seed) {
    // contract: loss(tape) builds the forward pass on the given tape and
    // returns the scalar loss; on a gradient-enabled tape it also runs
    // backward so the analytic gradients land in the store
    store.zero_grad();
    {
        Tape tape(true);
        loss(tape);
    }

    GradCheckResult res;
    Rng rng(seed);
    for (int k = 0; k < samples; ++k) {
        const int slot = int(rng.uniform_int(0, store.size() - 1));
        auto& s = store.slot(slot);
        const int r = int(rng.uniform_int(0, int(s.value.rows()) - 1));
        const int c = int(rng.uniform_int(0, int(s.value.cols()) - 1));
        const double analytic = s.grad(r, c);

        const double keep = s.value(r, c);
        s.value(r, c) = keep + eps;
        Tape tp(false);
        const double lp = loss(tp);
        s.value(r, c) = keep - eps;
        Tape tm(false);
        const double lm = loss(tm);
        s.value(r, c) = keep;

        const double numeric = (lp - lm) / (2.0 * eps);
        const double rel = std::abs(analytic - numeric) /
                           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        res.worst_rel = std::max(res.worst_rel, rel);
        ++res.checked;
        if (rel <= rel_tol) ++res.passed;
    }
    return res;
}

} // namespace matforge
