#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gloss/rng.hpp"
#include "gloss/tape.hpp"

namespace gloss {

// =============================================================================
// The trainable stand-in for the pretrained encoder: a linear map or a
// two-layer feedforward net producing d-dimensional embeddings, plus the
// linear classifier head and the optimizers that update both.
// =============================================================================

enum class Arch { linear, mlp2 };

inline const char* arch_name(Arch a) { return a == Arch::linear ? "linear" : "mlp2"; }

struct EncoderParams {
    Arch arch = Arch::linear;
    bool normalize_output = true;
    int d_in = 0, hidden = 0, embed = 0;
    Matrix w1, b1;  // linear: d_in x embed ; mlp2: d_in x hidden
    Matrix w2, b2;  // mlp2 only: hidden x embed

    bool operator==(const EncoderParams& o) const {
        return arch == o.arch && normalize_output == o.normalize_output && d_in == o.d_in &&
               hidden == o.hidden && embed == o.embed && w1 == o.w1 && b1 == o.b1 &&
               w2 == o.w2 && b2 == o.b2;
    }
};

struct ClassifierHead {
    Matrix weight;  // E x C
    Matrix bias;    // 1 x C

    bool operator==(const ClassifierHead& o) const {
        return weight == o.weight && bias == o.bias;
    }
};

// Xavier-uniform: +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
inline Matrix xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    return rng.uniform_matrix(fan_in, fan_out, -a, a);
}

inline EncoderParams init_encoder(Arch arch, int d_in, int hidden, int embed,
                                  bool normalize_output, uint64_t seed) {
    if (d_in < 1 || embed < 1) throw ValidationError("init_encoder: dimensions must be >= 1");
    if (arch == Arch::mlp2 && hidden < 1)
        throw ValidationError("init_encoder: mlp2 needs hidden >= 1");
    Rng rng(mix_seed(seed, 0xe4c0de));
    EncoderParams p;
    p.arch = arch;
    p.normalize_output = normalize_output;
    p.d_in = d_in;
    p.hidden = arch == Arch::mlp2 ? hidden : 0;
    p.embed = embed;
    if (arch == Arch::linear) {
        p.w1 = xavier_uniform(d_in, embed, rng);
        p.b1 = Matrix(1, embed);
    } else {
        p.w1 = xavier_uniform(d_in, hidden, rng);
        p.b1 = Matrix(1, hidden);
        p.w2 = xavier_uniform(hidden, embed, rng);
        p.b2 = Matrix(1, embed);
    }
    return p;
}

inline ClassifierHead init_head(int embed, int num_classes, uint64_t seed) {
    Rng rng(mix_seed(seed, 0xead));
    ClassifierHead h;
    h.weight = xavier_uniform(embed, num_classes, rng);
    h.bias = Matrix(1, num_classes);
    return h;
}

// ------------------------------------------------------------------ forward

// Tape handles of the parameter nodes registered by encode/classify, for
// reading gradients back out after backward.
struct EncoderNodes {
    NodeId x = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct HeadNodes {
    NodeId weight = -1, bias = -1;
};

// Bias rows are broadcast by multiplying a ones column into the 1 x k bias,
// which keeps the bias gradient (column sums) on the tape for free.
inline NodeId affine(Tape& tape, NodeId x, NodeId w, NodeId b) {
    const int rows = tape.value(x).rows();
    return tape.add(tape.matmul(x, w), tape.matmul(tape.input(Matrix::ones(rows, 1)), b));
}

inline NodeId encode(Tape& tape, const EncoderParams& p, const Matrix& x_raw,
                     EncoderNodes* nodes = nullptr) {
    if (x_raw.cols() != p.d_in)
        throw ShapeError("encode: input " + x_raw.shape_str() + " vs d_in=" +
                         std::to_string(p.d_in));
    EncoderNodes local;
    local.x = tape.input(x_raw);
    local.w1 = tape.input(p.w1);
    local.b1 = tape.input(p.b1);
    NodeId z;
    if (p.arch == Arch::linear) {
        z = affine(tape, local.x, local.w1, local.b1);
    } else {
        const NodeId h = tape.relu(affine(tape, local.x, local.w1, local.b1));
        local.w2 = tape.input(p.w2);
        local.b2 = tape.input(p.b2);
        z = affine(tape, h, local.w2, local.b2);
    }
    if (p.normalize_output) z = tape.l2_row_normalize(z);
    if (nodes) *nodes = local;
    return z;
}

inline NodeId classify(Tape& tape, const ClassifierHead& h, NodeId z, HeadNodes* nodes = nullptr) {
    if (tape.value(z).cols() != h.weight.rows())
        throw ShapeError("classify: embeddings " + tape.value(z).shape_str() + " vs head " +
                         h.weight.shape_str());
    HeadNodes local;
    local.weight = tape.input(h.weight);
    local.bias = tape.input(h.bias);
    const NodeId logits = affine(tape, z, local.weight, local.bias);
    if (nodes) *nodes = local;
    return logits;
}

// Encoder forward on values only (no tape), for metric evaluation.
inline Matrix encode_values(const EncoderParams& p, const Matrix& x_raw) {
    Tape tape;
    return tape.value(encode(tape, p, x_raw));
}

// ------------------------------------------------------------------ optimizer

struct ParamRef {
    std::string name;
    Matrix* value;
};

inline std::vector<ParamRef> encoder_param_refs(EncoderParams& p) {
    std::vector<ParamRef> refs{{"enc.w1", &p.w1}, {"enc.b1", &p.b1}};
    if (p.arch == Arch::mlp2) {
        refs.push_back({"enc.w2", &p.w2});
        refs.push_back({"enc.b2", &p.b2});
    }
    return refs;
}

inline std::vector<ParamRef> head_param_refs(ClassifierHead& h) {
    return {{"head.w", &h.weight}, {"head.b", &h.bias}};
}

enum class OptKind { sgd, adam };

struct OptimizerState {
    OptKind kind = OptKind::adam;
    double eta = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<Matrix> m, v;  // adam moments, aligned with the param list

    static OptimizerState make(OptKind kind, double eta, const std::vector<ParamRef>& params) {
        OptimizerState s;
        s.kind = kind;
        s.eta = eta;
        if (kind == OptKind::adam) {
            for (const auto& p : params) {
                s.m.emplace_back(p.value->rows(), p.value->cols());
                s.v.emplace_back(p.value->rows(), p.value->cols());
            }
        }
        return s;
    }
};

inline void optimizer_step(OptimizerState& state, const std::vector<ParamRef>& params,
                           const std::vector<const Matrix*>& grads) {
    if (params.size() != grads.size())
        throw ShapeError("optimizer_step: params/grads length mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!grads[i]->same_shape(*params[i].value))
            throw ShapeError("optimizer_step: gradient shape mismatch for " + params[i].name);
        if (!all_finite(*grads[i]))
            throw Error("optimizer_step: non-finite gradient for " + params[i].name);
    }
    ++state.step;
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i].value;
        const Matrix& g = *grads[i];
        if (state.kind == OptKind::sgd) {
            for (size_t k = 0; k < p.size(); ++k)
                p.raw()[k] -= state.eta * g.raw()[k];
        } else {
            Matrix& m = state.m[i];
            Matrix& v = state.v[i];
            const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
            const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
            for (size_t k = 0; k < p.size(); ++k) {
                const double gk = g.raw()[k];
                m.raw()[k] = state.beta1 * m.raw()[k] + (1.0 - state.beta1) * gk;
                v.raw()[k] = state.beta2 * v.raw()[k] + (1.0 - state.beta2) * gk * gk;
                const double mhat = m.raw()[k] / bc1;
                const double vhat = v.raw()[k] / bc2;
                p.raw()[k] -= state.eta * mhat / (std::sqrt(vhat) + state.eps);
            }
        }
    }
}

// ------------------------------------------------------------------ checkpoints
//
// Layout: magic "GLCK1", u8 arch, u8 normalize, u64 d_in, u64 hidden,
// u64 embed, encoder tensors (f64 row-major), u8 has_head, then u64 C and
// the head tensors when present. Round-trips bit-exactly.

inline constexpr char kCheckpointMagic[5] = {'G', 'L', 'C', 'K', '1'};

namespace detail {

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Matrix read_matrix(std::istream& in, int rows, int cols) {
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint: unexpected end of file");
    return m;
}

template <typename T>
void ck_write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T ck_read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("checkpoint: unexpected end of file");
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const EncoderParams& p,
                            const ClassifierHead* head = nullptr) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(kCheckpointMagic, 5);
    detail::ck_write_pod<uint8_t>(out, p.arch == Arch::linear ? 0 : 1);
    detail::ck_write_pod<uint8_t>(out, p.normalize_output ? 1 : 0);
    detail::ck_write_pod<uint64_t>(out, static_cast<uint64_t>(p.d_in));
    detail::ck_write_pod<uint64_t>(out, static_cast<uint64_t>(p.hidden));
    detail::ck_write_pod<uint64_t>(out, static_cast<uint64_t>(p.embed));
    detail::write_matrix(out, p.w1);
    detail::write_matrix(out, p.b1);
    if (p.arch == Arch::mlp2) {
        detail::write_matrix(out, p.w2);
        detail::write_matrix(out, p.b2);
    }
    detail::ck_write_pod<uint8_t>(out, head ? 1 : 0);
    if (head) {
        detail::ck_write_pod<uint64_t>(out, static_cast<uint64_t>(head->weight.cols()));
        detail::write_matrix(out, head->weight);
        detail::write_matrix(out, head->bias);
    }
}

struct Checkpoint {
    EncoderParams encoder;
    bool has_head = false;
    ClassifierHead head;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0)
        throw ParseError("bad magic: not a GLCK1 checkpoint");
    Checkpoint ck;
    const auto arch = detail::ck_read_pod<uint8_t>(in);
    if (arch > 1) throw ParseError("checkpoint: unknown architecture tag");
    ck.encoder.arch = arch == 0 ? Arch::linear : Arch::mlp2;
    ck.encoder.normalize_output = detail::ck_read_pod<uint8_t>(in) != 0;
    ck.encoder.d_in = static_cast<int>(detail::ck_read_pod<uint64_t>(in));
    ck.encoder.hidden = static_cast<int>(detail::ck_read_pod<uint64_t>(in));
    ck.encoder.embed = static_cast<int>(detail::ck_read_pod<uint64_t>(in));
    const int first_out = ck.encoder.arch == Arch::linear ? ck.encoder.embed : ck.encoder.hidden;
    ck.encoder.w1 = detail::read_matrix(in, ck.encoder.d_in, first_out);
    ck.encoder.b1 = detail::read_matrix(in, 1, first_out);
    if (ck.encoder.arch == Arch::mlp2) {
        ck.encoder.w2 = detail::read_matrix(in, ck.encoder.hidden, ck.encoder.embed);
        ck.encoder.b2 = detail::read_matrix(in, 1, ck.encoder.embed);
    }
    ck.has_head = detail::ck_read_pod<uint8_t>(in) != 0;
    if (ck.has_head) {
        const int c = static_cast<int>(detail::ck_read_pod<uint64_t>(in));
        ck.head.weight = detail::read_matrix(in, ck.encoder.embed, c);
        ck.head.bias = detail::read_matrix(in, 1, c);
    }
    return ck;
}

} // namespace gloss
