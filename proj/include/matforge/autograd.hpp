#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "matforge/util.hpp"

namespace matforge {

using Mat = Eigen::MatrixXd;

/// Named trainable tensors with their gradient accumulators.
class ParamStore {
public:
    struct Slot {
        std::string name;
        Mat value;
        Mat grad;
    };

    /// Gaussian init scaled by `stddev` (0 = zero init).
    int add(const std::string& name, int rows, int cols, double stddev, Rng& rng);
    /// Constant-filled tensor (layernorm gains start at 1).
    int add_constant(const std::string& name, int rows, int cols, double fill);

    Slot& slot(int id) { return slots_[size_t(id)]; }
    const Slot& slot(int id) const { return slots_[size_t(id)]; }
    int find(const std::string& name) const;
    int size() const { return int(slots_.size()); }
    void zero_grad();
    long long scalar_count() const;

    std::vector<Mat> snapshot_values() const;
    void restore_values(const std::vector<Mat>& values);

private:
    std::vector<Slot> slots_;
    std::map<std::string, int> index_;
};

/// Reverse-mode tape over dense double matrices. Build a graph of ops, call
/// backward(loss) once; leaf gradients accumulate into the ParamStore.
class Tape {
public:
    explicit Tape(bool with_grad = true) : with_grad_(with_grad) {}

    int constant(Mat m);
    int leaf(ParamStore& store, int slot_id);

    int add(int a, int b);
    int sub(int a, int b);
    int add_rowvec(int a, int row);      // X + 1 * r   (r is 1 x D)
    int scale(int a, double c);
    int hadamard(int a, int b);
    int matmul(int a, int b);
    int transpose(int a);
    int gelu(int a);
    int tanh_op(int a);
    int layernorm(int a, int gamma, int beta); // row-wise, gamma/beta 1 x D
    int softmax_rows(int a);
    int gather_rows(int table, std::vector<int> ids);
    int col_block(int a, int start, int len);
    int concat_cols(const std::vector<int>& xs);
    int concat_rows(const std::vector<int>& xs);
    int row(int a, int r); // 1 x D view of one row

    /// Mean cross-entropy of softmax(logits) rows against integer targets;
    /// rows with target < 0 are ignored. Returns a 1x1 node.
    int softmax_ce_mean(int logits, std::vector<int> targets);

    const Mat& value(int id) const { return nodes_[size_t(id)].value; }
    double scalar(int id) const { return nodes_[size_t(id)].value(0, 0); }
    bool with_grad() const { return with_grad_; }

    void backward(int loss_id);

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Tape&, Node&)> back; // null for constants
        ParamStore* store = nullptr;            // set for leaves
        int slot_id = -1;
    };

    int push(Mat value, std::function<void(Tape&, Node&)> back);
    Mat& grad(int id) { return nodes_[size_t(id)].grad; }

    std::vector<Node> nodes_;
    bool with_grad_;
};

/// Adam with bias correction; one state slot per ParamStore tensor.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Mat> m_, v_;
};

struct GradCheckResult {
    int checked = 0;
    int passed = 0;
    double worst_rel = 0.0;
};

/// Compare analytic gradients against central finite differences on
/// `samples` randomly chosen weight coordinates. `loss` must rebuild the
/// forward pass from the store's current values and return the scalar loss;
/// on a gradient-enabled tape it must also run backward.
GradCheckResult gradient_check(ParamStore& store, const std::function<double(Tape&)>& loss,
                               int samples, double eps, double rel_tol, uint64_t seed);

} // namespace matforge
