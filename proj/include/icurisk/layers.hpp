#pragma once

#include <algorithm>
#include <cstddef>

#include "core.hpp"
#include "params.hpp"

namespace icurisk {

// SELU constants: the standard self-normalizing pair.
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

// ---------------------------------------------------------------------------
// 1D convolution over (T, C_in) sequences, kernel (K, C_in, C_out).
// Causal mode left-pads K-1 copies of the first frame so step t depends only
// on inputs <= t; stride is fixed at 1 and output length equals T.
// Non-causal mode is a valid convolution with output length T-K+1.
// ---------------------------------------------------------------------------

inline std::size_t conv1d_pad_row(std::size_t padded_index, std::size_t pad) {
    return padded_index >= pad ? padded_index - pad : 0;
}

inline Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                             bool causal_pad = true) {
    if (input.rank() != 2 || kernel.rank() != 3 || bias.rank() != 1)
        throw config_error("conv1d: input must be (T,C_in), kernel (K,C_in,C_out), bias (C_out)");
    const std::size_t T = input.dim(0), c_in = input.dim(1);
    const std::size_t K = kernel.dim(0), c_out = kernel.dim(2);
    if (K < 1) throw config_error("conv1d: kernel length must be >= 1");
    if (kernel.dim(1) != c_in)
        throw config_error("conv1d: kernel C_in " + std::to_string(kernel.dim(1)) +
                           " does not match input channels " + std::to_string(c_in));
    if (bias.dim(0) != c_out) throw config_error("conv1d: bias length must equal C_out");

    const std::size_t pad = causal_pad ? K - 1 : 0;
    if (!causal_pad && T < K) throw config_error("conv1d: sequence shorter than kernel");
    const std::size_t t_out = causal_pad ? T : T - K + 1;

    Tensor out({t_out, c_out});
    for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t o = 0; o < c_out; ++o) out(t, o) = bias(o);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t row = conv1d_pad_row(t + k, pad);
            const double* x = input.data() + row * c_in;
            for (std::size_t c = 0; c < c_in; ++c) {
                const double xv = x[c];
                if (xv == 0.0) continue;
                const double* w = kernel.data() + (k * c_in + c) * c_out;
                double* y = out.data() + t * c_out;
                for (std::size_t o = 0; o < c_out; ++o) y[o] += w[o] * xv;
            }
        }
    }
    return out;
}

struct Conv1dGrads {
    Tensor input;
    Tensor kernel;
    Tensor bias;
};

inline Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernel,
                                   const Tensor& upstream, bool causal_pad = true) {
    const std::size_t T = input.dim(0), c_in = input.dim(1);
    const std::size_t K = kernel.dim(0), c_out = kernel.dim(2);
    const std::size_t pad = causal_pad ? K - 1 : 0;
    const std::size_t t_out = causal_pad ? T : T - K + 1;
    require_shape(upstream, {t_out, c_out}, "conv1d_backward upstream");

    Conv1dGrads g{Tensor({T, c_in}), Tensor({K, c_in, c_out}), Tensor({c_out})};
    for (std::size_t t = 0; t < t_out; ++t) {
        const double* up = upstream.data() + t * c_out;
        for (std::size_t o = 0; o < c_out; ++o) g.bias(o) += up[o];
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t row = conv1d_pad_row(t + k, pad);
            const double* x = input.data() + row * c_in;
            double* gx = g.input.data() + row * c_in;
            for (std::size_t c = 0; c < c_in; ++c) {
                const double* w = kernel.data() + (k * c_in + c) * c_out;
                double* gw = g.kernel.data() + (k * c_in + c) * c_out;
                double acc = 0.0;
                for (std::size_t o = 0; o < c_out; ++o) {
                    gw[o] += up[o] * x[c];
                    acc += up[o] * w[o];
                }
                gx[c] += acc;
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Causal max pooling, stride 1 (sequence length preserved). Backward routes
// the upstream gradient to the earliest maximal index in each window.
// ---------------------------------------------------------------------------

struct MaxPoolCache {
    std::size_t T = 0, C = 0;
    std::vector<std::size_t> argmax;  // input row index per output cell
};

inline Tensor maxpool1d_forward(const Tensor& input, int window, bool causal = true,
                                MaxPoolCache* cache = nullptr) {
    if (window <= 0) throw config_error("maxpool1d: window must be positive");
    if (input.rank() != 2) throw config_error("maxpool1d: input must be (T,C)");
    (void)causal;  // causal left-padding with the first frame is the only mode
    const std::size_t T = input.dim(0), C = input.dim(1);
    Tensor out({T, C});
    if (cache) {
        cache->T = T;
        cache->C = C;
        cache->argmax.assign(T * C, 0);
    }
    const std::size_t w = static_cast<std::size_t>(window);
    for (std::size_t t = 0; t < T; ++t) {
        // Padding repeats the first frame, so the effective window is
        // input rows [max(0, t-w+1), t]; ties resolve to the earliest row.
        const std::size_t lo = t + 1 >= w ? t + 1 - w : 0;
        for (std::size_t c = 0; c < C; ++c) {
            double best = input(lo, c);
            std::size_t best_row = lo;
            for (std::size_t r = lo + 1; r <= t; ++r) {
                if (input(r, c) > best) {
                    best = input(r, c);
                    best_row = r;
                }
            }
            out(t, c) = best;
            if (cache) cache->argmax[t * C + c] = best_row;
        }
    }
    return out;
}

inline Tensor maxpool1d_backward(const MaxPoolCache& cache, const Tensor& upstream) {
    require_shape(upstream, {cache.T, cache.C}, "maxpool1d_backward upstream");
    Tensor grad({cache.T, cache.C});
    for (std::size_t t = 0; t < cache.T; ++t)
        for (std::size_t c = 0; c < cache.C; ++c)
            grad(cache.argmax[t * cache.C + c], c) += upstream(t, c);
    return grad;
}

// ---------------------------------------------------------------------------
// LSTM with sigmoid input/forget/output gates and tanh candidate.
// Weight layout: w_ih (C_in, 4H), w_hh (H, 4H), bias (4H), gate order i,f,g,o.
// Forward returns every hidden state so each hour yields a prediction.
// ---------------------------------------------------------------------------

struct LstmCache {
    std::size_t T = 0, c_in = 0, H = 0;
    Tensor input;     // (T, C_in)
    Tensor gates;     // (T, 4H) post-activation
    Tensor cell;      // (T, H)
    Tensor tanh_cell; // (T, H)
    Tensor hidden;    // (T, H)
    Tensor h0, c0;    // (H,)
};

inline Tensor lstm_forward(const Tensor& input, const Tensor& w_ih, const Tensor& w_hh,
                           const Tensor& bias, LstmCache* cache = nullptr,
                           const Tensor* h0 = nullptr, const Tensor* c0 = nullptr) {
    if (input.rank() != 2) throw config_error("lstm: input must be (T,C_in)");
    const std::size_t T = input.dim(0), c_in = input.dim(1);
    if (w_ih.rank() != 2 || w_ih.dim(0) != c_in || w_ih.dim(1) % 4 != 0)
        throw config_error("lstm: w_ih must be (C_in,4H)");
    const std::size_t H = w_ih.dim(1) / 4;
    require_shape(w_hh, {H, 4 * H}, "lstm w_hh");
    require_shape(bias, {4 * H}, "lstm bias");

    Tensor h_prev = h0 ? *h0 : Tensor({H});
    Tensor c_prev = c0 ? *c0 : Tensor({H});
    require_shape(h_prev, {H}, "lstm h0");
    require_shape(c_prev, {H}, "lstm c0");

    Tensor hidden({T, H});
    Tensor gates({T, 4 * H});
    Tensor cell({T, H});
    Tensor tanh_cell({T, H});

    std::vector<double> pre(4 * H);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < 4 * H; ++j) pre[j] = bias(j);
        const double* x = input.data() + t * c_in;
        for (std::size_t c = 0; c < c_in; ++c) {
            const double xv = x[c];
            if (xv == 0.0) continue;
            const double* w = w_ih.data() + c * 4 * H;
            for (std::size_t j = 0; j < 4 * H; ++j) pre[j] += w[j] * xv;
        }
        for (std::size_t k = 0; k < H; ++k) {
            const double hv = h_prev(k);
            if (hv == 0.0) continue;
            const double* w = w_hh.data() + k * 4 * H;
            for (std::size_t j = 0; j < 4 * H; ++j) pre[j] += w[j] * hv;
        }
        for (std::size_t k = 0; k < H; ++k) {
            const double gi = sigmoid(pre[k]);
            const double gf = sigmoid(pre[H + k]);
            const double gg = std::tanh(pre[2 * H + k]);
            const double go = sigmoid(pre[3 * H + k]);
            const double cv = gf * c_prev(k) + gi * gg;
            const double tc = std::tanh(cv);
            gates(t, k) = gi;
            gates(t, H + k) = gf;
            gates(t, 2 * H + k) = gg;
            gates(t, 3 * H + k) = go;
            cell(t, k) = cv;
            tanh_cell(t, k) = tc;
            hidden(t, k) = go * tc;
        }
        for (std::size_t k = 0; k < H; ++k) {
            h_prev(k) = hidden(t, k);
            c_prev(k) = cell(t, k);
        }
    }

    if (cache) {
        cache->T = T;
        cache->c_in = c_in;
        cache->H = H;
        cache->input = input;
        cache->gates = std::move(gates);
        cache->cell = std::move(cell);
        cache->tanh_cell = std::move(tanh_cell);
        cache->hidden = hidden;
        cache->h0 = h0 ? *h0 : Tensor({H});
        cache->c0 = c0 ? *c0 : Tensor({H});
    }
    return hidden;
}

struct LstmGrads {
    Tensor input;  // (T, C_in)
    Tensor w_ih;   // (C_in, 4H)
    Tensor w_hh;   // (H, 4H)
    Tensor bias;   // (4H)
};

// Exact backpropagation through time over the cached forward state.
inline LstmGrads lstm_backward(const LstmCache& cache, const Tensor& w_ih, const Tensor& w_hh,
                               const Tensor& upstream) {
    if (cache.T == 0) throw usage_error("lstm_backward: forward cache missing");
    const std::size_t T = cache.T, c_in = cache.c_in, H = cache.H;
    require_shape(upstream, {T, H}, "lstm_backward upstream");

    LstmGrads g{Tensor({T, c_in}), Tensor({c_in, 4 * H}), Tensor({H, 4 * H}), Tensor({4 * H})};
    std::vector<double> dh(H, 0.0), dc(H, 0.0), dpre(4 * H);

    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t k = 0; k < H; ++k) dh[k] += upstream(t, k);
        const double* c_prev = t > 0 ? cache.cell.data() + (t - 1) * H : cache.c0.data();
        const double* h_prev = t > 0 ? cache.hidden.data() + (t - 1) * H : cache.h0.data();
        for (std::size_t k = 0; k < H; ++k) {
            const double gi = cache.gates(t, k);
            const double gf = cache.gates(t, H + k);
            const double gg = cache.gates(t, 2 * H + k);
            const double go = cache.gates(t, 3 * H + k);
            const double tc = cache.tanh_cell(t, k);
            const double d_out = dh[k] * tc;
            double d_cell = dc[k] + dh[k] * go * (1.0 - tc * tc);
            const double d_in = d_cell * gg;
            const double d_forget = d_cell * c_prev[k];
            const double d_cand = d_cell * gi;
            dpre[k] = d_in * gi * (1.0 - gi);
            dpre[H + k] = d_forget * gf * (1.0 - gf);
            dpre[2 * H + k] = d_cand * (1.0 - gg * gg);
            dpre[3 * H + k] = d_out * go * (1.0 - go);
            dc[k] = d_cell * gf;
            dh[k] = 0.0;
        }
        for (std::size_t j = 0; j < 4 * H; ++j) g.bias(j) += dpre[j];
        const double* x = cache.input.data() + t * c_in;
        for (std::size_t c = 0; c < c_in; ++c) {
            const double* w = w_ih.data() + c * 4 * H;
            double* gw = g.w_ih.data() + c * 4 * H;
            double acc = 0.0;
            for (std::size_t j = 0; j < 4 * H; ++j) {
                gw[j] += dpre[j] * x[c];
                acc += dpre[j] * w[j];
            }
            g.input(t, c) = acc;
        }
        for (std::size_t k = 0; k < H; ++k) {
            const double* w = w_hh.data() + k * 4 * H;
            double* gw = g.w_hh.data() + k * 4 * H;
            double acc = 0.0;
            for (std::size_t j = 0; j < 4 * H; ++j) {
                gw[j] += dpre[j] * h_prev[k];
                acc += dpre[j] * w[j];
            }
            dh[k] = acc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Dense affine map, per step and applied row-wise over sequences.
// ---------------------------------------------------------------------------

inline Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 1) throw config_error("dense: input must be (C_in,)");
    const std::size_t c_in = input.dim(0);
    if (weight.rank() != 2 || weight.dim(0) != c_in)
        throw config_error("dense: weight must be (C_in,C_out); C_in mismatch");
    const std::size_t c_out = weight.dim(1);
    require_shape(bias, {c_out}, "dense bias");
    Tensor out({c_out});
    for (std::size_t o = 0; o < c_out; ++o) out(o) = bias(o);
    for (std::size_t c = 0; c < c_in; ++c) {
        const double xv = input(c);
        if (xv == 0.0) continue;
        const double* w = weight.data() + c * c_out;
        for (std::size_t o = 0; o < c_out; ++o) out(o) += w[o] * xv;
    }
    return out;
}

struct DenseGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

inline DenseGrads dense_backward(const Tensor& input, const Tensor& weight,
                                 const Tensor& upstream) {
    const std::size_t c_in = weight.dim(0), c_out = weight.dim(1);
    require_shape(upstream, {c_out}, "dense_backward upstream");
    DenseGrads g{Tensor({c_in}), Tensor({c_in, c_out}), upstream};
    for (std::size_t c = 0; c < c_in; ++c) {
        const double* w = weight.data() + c * c_out;
        double* gw = g.weight.data() + c * c_out;
        double acc = 0.0;
        for (std::size_t o = 0; o < c_out; ++o) {
            gw[o] = upstream(o) * input(c);
            acc += upstream(o) * w[o];
        }
        g.input(c) = acc;
    }
    return g;
}

inline Tensor dense_seq_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 2) throw config_error("dense_seq: input must be (T,C_in)");
    const std::size_t T = input.dim(0), c_in = input.dim(1);
    if (weight.rank() != 2 || weight.dim(0) != c_in)
        throw config_error("dense_seq: weight must be (C_in,C_out); C_in mismatch");
    const std::size_t c_out = weight.dim(1);
    require_shape(bias, {c_out}, "dense_seq bias");
    Tensor out({T, c_out});
    for (std::size_t t = 0; t < T; ++t) {
        double* y = out.data() + t * c_out;
        for (std::size_t o = 0; o < c_out; ++o) y[o] = bias(o);
        const double* x = input.data() + t * c_in;
        for (std::size_t c = 0; c < c_in; ++c) {
            const double xv = x[c];
            if (xv == 0.0) continue;
            const double* w = weight.data() + c * c_out;
            for (std::size_t o = 0; o < c_out; ++o) y[o] += w[o] * xv;
        }
    }
    return out;
}

inline DenseGrads dense_seq_backward(const Tensor& input, const Tensor& weight,
                                     const Tensor& upstream) {
    const std::size_t T = input.dim(0), c_in = weight.dim(0), c_out = weight.dim(1);
    require_shape(upstream, {T, c_out}, "dense_seq_backward upstream");
    DenseGrads g{Tensor({T, c_in}), Tensor({c_in, c_out}), Tensor({c_out})};
    for (std::size_t t = 0; t < T; ++t) {
        const double* up = upstream.data() + t * c_out;
        const double* x = input.data() + t * c_in;
        for (std::size_t o = 0; o < c_out; ++o) g.bias(o) += up[o];
        double* gx = g.input.data() + t * c_in;
        for (std::size_t c = 0; c < c_in; ++c) {
            const double* w = weight.data() + c * c_out;
            double* gw = g.weight.data() + c * c_out;
            double acc = 0.0;
            for (std::size_t o = 0; o < c_out; ++o) {
                gw[o] += up[o] * x[c];
                acc += up[o] * w[o];
            }
            gx[c] = acc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// SELU activation and its derivative.
// ---------------------------------------------------------------------------

inline double selu_scalar(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_derivative(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

inline Tensor selu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = selu_scalar(input[i]);
    return out;
}

inline Tensor selu_backward(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream)) throw usage_error("selu_backward: shape mismatch");
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad[i] = upstream[i] * selu_derivative(input[i]);
    return grad;
}

// ---------------------------------------------------------------------------
// Inverted dropout. Inference mode is exactly the identity.
// ---------------------------------------------------------------------------

struct DropoutMask {
    double keep_prob = 1.0;
    Tensor mask;  // binary, shaped like the layer output
    bool train_mode = false;
};

inline Tensor dropout_forward(const Tensor& input, double keep_prob, bool train_mode, Rng& rng,
                              DropoutMask* out_mask = nullptr) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw config_error("dropout: keep_prob must be in (0,1]");
    if (!train_mode || keep_prob == 1.0) {
        if (out_mask) {
            out_mask->keep_prob = keep_prob;
            out_mask->train_mode = train_mode;
            out_mask->mask = Tensor(input.shape(), 1.0);
        }
        return input;
    }
    Tensor mask(input.shape());
    Tensor out(input.shape());
    const double inv_keep = 1.0 / keep_prob;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const bool keep = rng.bernoulli(keep_prob);
        mask[i] = keep ? 1.0 : 0.0;
        out[i] = keep ? input[i] * inv_keep : 0.0;
    }
    if (out_mask) {
        out_mask->keep_prob = keep_prob;
        out_mask->train_mode = true;
        out_mask->mask = std::move(mask);
    }
    return out;
}

inline Tensor dropout_backward(const DropoutMask& mask, const Tensor& upstream) {
    if (!mask.train_mode || mask.keep_prob == 1.0) return upstream;
    if (!mask.mask.same_shape(upstream)) throw usage_error("dropout_backward: shape mismatch");
    Tensor grad(upstream.shape());
    const double inv_keep = 1.0 / mask.keep_prob;
    for (std::size_t i = 0; i < upstream.size(); ++i)
        grad[i] = upstream[i] * mask.mask[i] * inv_keep;
    return grad;
}

}  // namespace icurisk
