#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/paramset.hpp"
#include "camel/rng.hpp"
#include "camel/tape.hpp"

namespace camel::layers {

using ad::Var;

/// Real-valued map applied before a real softmax: |z|, Re z or Im z.
enum class Lift : std::uint8_t { Abs, Re, Im };

const char* lift_name(Lift l);
Lift parse_lift(const std::string& s);

/// Elementwise lift; the result is complex with zero imaginary part.
Var lift(const Var& x, Lift kind);

/// Complex convolution over (N, Cin, L) frames with kernel (Cout, Cin, K) and bias (Cout).
/// Real and imaginary parts follow Re(A)*Re(x) - Im(A)*Im(x) + Re(b) and
/// Re(A)*Im(x) + Im(A)*Re(x) + Im(b); valid padding.
Var cconv1d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride = 1);

/// Complex fully connected layer: out = W^T x + b with W of shape (in, out).
/// x may be a vector (in) or a batch (N, in).
Var cfc(const Var& x, const Var& weight, const Var& bias);

/// Real softmax of the lifted input over the last axis.
Var c_softmax(const Var& x, Lift kind);

/// Scaled dot-product attention, rank 2 (L, d) or batched rank 3 (N, L, d).
/// Weights are c_softmax(Q K^T / sqrt(d_k)) with d_k the feature size of K.
Var c_attention(const Var& q, const Var& k, const Var& v, Lift kind);

struct MhaParams {
    std::vector<Var> wq, wk, wv;  // one (d_in, d_head) projection per head
    Var wo;                       // (n_heads * d_head, d_out)
};

/// Concat_k c_attention(Q Wq_k, K Wk_k, V Wv_k) followed by the output projection.
Var c_mha(const Var& q, const Var& k, const Var& v, const MhaParams& p, Lift kind);

/// Running statistics for inference-mode normalization.
struct NormState {
    CTensor mean;             // (C)
    std::vector<double> var;  // (C)
    double momentum = 0.1;

    static NormState identity(std::size_t channels);
};

/// Complex normalization per channel (axis 1) over every other axis:
///   gamma * (x - E[x]) / sqrt(E|x - E[x]|^2 + eps) + kappa.
/// In training mode the batch statistics are used (and folded into `running` when given);
/// otherwise `running` supplies them. Throws for eps < 0 or fewer than 2 samples per channel.
Var c_norm(const Var& x, const Var& gamma, const Var& kappa, double eps = 1e-5, NormState* running = nullptr,
           bool training = true);

/// R_af(Re x) + j R_af(Im x).
Var c_act(const Var& x, ad::ActKind kind);

/// x (.., d_in) times w (d_in, d_out) along the last axis.
Var linear_last(const Var& x, const Var& w);
/// Mean over one axis, removing it.
Var mean_axis(const Var& x, std::size_t axis);

// ---------------------------------------------------------------------------------------------
// The full network.

struct ArchConfig {
    std::size_t n_classes = 5;
    std::size_t frame_len = 128;
    std::size_t conv_channels = 128;
    std::size_t attn_dim = 64;
    std::size_t n_heads = 8;
    Lift softmax_lift = Lift::Abs;
    ad::ActKind activation = ad::ActKind::CRelu;
    std::size_t conv_kernel = 3;
    std::size_t conv_stride = 1;
    std::size_t conv_blocks = 1;
    std::size_t fc_blocks = 1;
    std::size_t fc_hidden = 64;
    bool use_attention = true;
    /// Real-valued ablation: I and Q enter as two real channels and every weight stays real.
    bool real_valued = false;
    double norm_eps = 1e-5;

    std::size_t in_channels() const { return real_valued ? 2 : 1; }
    /// Sequence length after the convolution blocks.
    std::size_t seq_len() const;
    void validate() const;

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Differentiable classifier over batches of complex frames.
class Classifier {
public:
    virtual ~Classifier() = default;
    /// frames: (N, 1, frame_len) complex. Returns (N, n_classes) real log-probabilities.
    virtual Var log_probs(ad::Tape& tape, std::span<const Var> params, const CTensor& frames) const = 0;
    /// Parameters are constrained to the reals (gradients are projected).
    virtual bool real_params() const { return false; }
};

class CamelNet final : public Classifier {
public:
    explicit CamelNet(ArchConfig cfg);

    const ArchConfig& config() const noexcept { return cfg_; }

    /// Fresh parameters: Re and Im uniform with standard deviation 1/sqrt(2 fan_in) each;
    /// normalization scale 1, shifts and biases 0.
    ParamSet init_params(Rng& rng) const;
    /// Same names and shapes as init_params, every value zero.
    ParamSet zero_params() const;

    Var log_probs(ad::Tape& tape, std::span<const Var> params, const CTensor& frames) const override;
    bool real_params() const override { return cfg_.real_valued; }

    /// Network input for a frame batch: (N, 1, L) complex, or (N, 2, L) real for the real-valued net.
    CTensor prepare_input(const CTensor& frames) const;

private:
    ArchConfig cfg_;
};

/// Class log-probabilities of a (N, 1, frame_len) frame batch under parameters theta.
CTensor camel_forward(const CTensor& frames, const ParamSet& theta, const ArchConfig& cfg);

/// Mean negative log-likelihood of integer labels under (N, C) log-probabilities.
Var cross_entropy(const Var& log_probs, std::span<const int> labels);

/// Argmax over the last axis of a (N, C) tensor's real part.
std::vector<int> argmax_rows(const CTensor& t);

}  // namespace camel::layers
