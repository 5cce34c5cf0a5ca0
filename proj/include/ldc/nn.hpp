#pragma once

#include <string>
#include <vector>

#include "ldc/rng.hpp"
#include "ldc/tensor.hpp"

namespace ldc::nn {

// Trainable parameter: flat values plus an accumulated gradient of equal size.
struct Param {
    std::string name;
    std::vector<double> v;
    std::vector<double> g;

    void init_size(size_t n) {
        v.assign(n, 0.0);
        g.assign(n, 0.0);
    }
    size_t size() const { return v.size(); }
};

// Per-forward-call activation cache. Layers push what their backward needs in
// forward order and pop in reverse; a tape is owned by the caller, so forward
// passes stay read-only on the layers themselves and may run concurrently.
struct Tape {
    std::vector<Tensor> stack;

    void push(Tensor t) { stack.push_back(std::move(t)); }
    Tensor pop() {
        Tensor t = std::move(stack.back());
        stack.pop_back();
        return t;
    }
    bool empty() const { return stack.empty(); }
    void clear() { stack.clear(); }
};

// row-major C(MxN) += A(MxK) * B(KxN)
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c);
// C(MxN) += A(MxK) * B(NxK)^T
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c);
// C(MxN) += A(KxM)^T * B(KxN)
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c);

// kxk convolution, zero padding k/2, square stride. Weight [out_c, in_c*k*k].
struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1;
    Param weight, bias;

    void init(const std::string& name, int in_c_, int out_c_, int k_, int stride_, Rng& rng,
              bool zero_init = false);
    int out_dim(int d) const { return (d + 2 * (k / 2) - k) / stride + 1; }
    Tensor forward(const Tensor& x, Tape& tape) const;
    // returns dx; accumulates weight grads when train is set
    Tensor backward(const Tensor& dy, Tape& tape, bool train);
    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct GroupNorm {
    int channels = 0, groups = 1;
    double eps = 1e-5;
    Param gamma, beta;

    void init(const std::string& name, int channels_, int groups_);
    Tensor forward(const Tensor& x, Tape& tape) const;
    Tensor backward(const Tensor& dy, Tape& tape, bool train);
    void collect(std::vector<Param*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// x * sigmoid(x), stateless
Tensor silu(const Tensor& x, Tape& tape);
Tensor silu_backward(const Tensor& dy, Tape& tape);

struct Linear {
    int in_dim = 0, out_dim = 0;
    Param weight, bias;  // [out, in], [out]

    void init(const std::string& name, int in_dim_, int out_dim_, Rng& rng);
    std::vector<double> forward(const std::vector<double>& x, Tape& tape) const;
    std::vector<double> backward(const std::vector<double>& dy, Tape& tape, bool train);
    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct Embedding {
    int rows = 0, dim = 0;
    Param table;  // [rows, dim]

    void init(const std::string& name, int rows_, int dim_, Rng& rng, double scale = 0.1);
    std::vector<double> forward(int idx) const;
    void backward(const std::vector<double>& dy, int idx, bool train);
    void collect(std::vector<Param*>& out) { out.push_back(&table); }
};

// 2x2 mean pooling and nearest-neighbor x2 upsampling (no parameters)
Tensor avgpool2(const Tensor& x);
Tensor avgpool2_backward(const Tensor& dy);
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& dy);

// Adam with decoupled weight decay.
struct AdamW {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long step_count = 0;
    std::vector<std::vector<double>> m, v;

    void step(const std::vector<Param*>& params);
    static void zero_grad(const std::vector<Param*>& params);
};

size_t param_count(const std::vector<Param*>& params);

}  // namespace ldc::nn
