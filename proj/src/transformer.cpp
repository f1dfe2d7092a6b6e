#include "ckd/transformer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace ckd {

std::string_view to_string(Normalization n) {
    switch (n) {
        case Normalization::Id: return "id";
        case Normalization::Exp: return "exp";
        case Normalization::Softmax: return "softmax";
    }
    return "unknown";
}

Normalization parse_normalization(std::string_view name) {
    if (name == "id") return Normalization::Id;
    if (name == "exp") return Normalization::Exp;
    if (name == "softmax") return Normalization::Softmax;
    throw Error("unknown normalization '" + std::string(name) + "' (expected id, exp or softmax)");
}

Kernel kernel_for(Normalization n) { return n == Normalization::Id ? Kernel::Id : Kernel::Exp; }

Variant variant_for(Normalization n) {
    return n == Normalization::Softmax ? Variant::SoftmaxNormalized : Variant::Raw;
}

Matrix attention_weights(const AttentionHead& head, const Matrix& e, Normalization n) {
    if (head.wq.cols() != e.cols() || head.wk.cols() != e.cols() || head.wq.rows() != head.wk.rows())
        throw Error("attention_weights: query/key shapes do not match the token width");
    const Eigen::Index len = e.rows();
    const Matrix q = e * head.wq.transpose();
    const Matrix k = e * head.wk.transpose();
    Matrix a = Matrix::Zero(len, len);
    for (Eigen::Index t = 0; t < len; ++t) {
        for (Eigen::Index s = 0; s <= t; ++s) a(t, s) = q.row(t).dot(k.row(s));
        switch (n) {
            case Normalization::Id: break;
            case Normalization::Exp:
                for (Eigen::Index s = 0; s <= t; ++s) a(t, s) = std::exp(a(t, s));
                break;
            case Normalization::Softmax: {
                const double top = a.row(t).head(t + 1).maxCoeff();
                double sum = 0.0;
                for (Eigen::Index s = 0; s <= t; ++s) {
                    a(t, s) = std::exp(a(t, s) - top);
                    sum += a(t, s);
                }
                a.row(t).head(t + 1) /= sum;
                break;
            }
        }
    }
    return a;
}

Matrix attention_forward(const std::vector<AttentionHead>& heads, const Matrix& e, Normalization n) {
    Matrix out = Matrix::Zero(e.rows(), e.cols());
    for (const auto& head : heads) {
        if (head.wv.rows() != e.cols() || head.wv.cols() != e.cols())
            throw Error("attention_forward: value matrix must be D x D for token width D");
        const Matrix a = attention_weights(head, e, n);
        const Matrix v = e * head.wv.transpose();
        out += a * v;  // a is lower triangular, so row t only sees s <= t
    }
    return out;
}

DescentLayer build_descent_layer(Eigen::Index d, double eta, Normalization n, DescentLayerOptions options) {
    if (d < 1) throw Error("build_descent_layer: d must be >= 1");
    if (!(eta > 0.0)) throw Error("build_descent_layer: eta must be positive");
    const TokenLayout lay{d};
    const Eigen::Index width = lay.width();

    // Head 1: scores <x_t, x_s>, value -eta * u_s into the u-slot.
    AttentionHead h1;
    h1.wq = Matrix::Zero(d, width);
    h1.wq.block(0, lay.cur(), d, d).setIdentity();
    h1.wk = h1.wq;
    h1.wv = Matrix::Zero(width, width);
    h1.wv.block(lay.u(), lay.u(), d, d) = -eta * Matrix::Identity(d, d);

    // Head 2: scores <x_t, x_{s-1}> + p1_s * p2_t, value +eta * cur_copy_s into the u-slot.
    AttentionHead h2;
    h2.wq = Matrix::Zero(d + 1, width);
    h2.wq.block(0, lay.cur(), d + 1, d + 1).setIdentity();
    h2.wk = Matrix::Zero(d + 1, width);
    h2.wk.block(0, lay.prev(), d + 1, d + 1).setIdentity();
    if (options.ablate_bos) h2.wk(d, lay.p1()) = 0.0;
    h2.wv = Matrix::Zero(width, width);
    h2.wv.block(lay.u(), lay.cur_copy(), d, d) = eta * Matrix::Identity(d, d);

    if (options.square) {
        for (AttentionHead* h : {&h1, &h2}) {
            Matrix q = Matrix::Zero(width, width);
            Matrix k = Matrix::Zero(width, width);
            q.topRows(h->wq.rows()) = h->wq;
            k.topRows(h->wk.rows()) = h->wk;
            h->wq = std::move(q);
            h->wk = std::move(k);
        }
    }
    return {d, eta, n, {std::move(h1), std::move(h2)}};
}

Matrix build_t0_exact(const Tokens& tokens) {
    const Eigen::Index d = tokens.cols();
    const TokenLayout lay{d};
    Matrix e = Matrix::Zero(tokens.rows(), lay.width());
    for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
        if (t == 0) {
            e(t, lay.p1()) = 1.0;
        } else {
            e.row(t).segment(lay.prev(), d) = tokens.row(t - 1);
            e.row(t).segment(lay.cur_copy(), d) = tokens.row(t);
        }
        e.row(t).segment(lay.cur(), d) = tokens.row(t);
        e(t, lay.p2()) = 1.0;
    }
    return e;
}

T0Approximation build_t0_approx(const Tokens& tokens, double sharpness) {
    if (!(sharpness >= 1.0)) throw Error("build_t0_approx: sharpness must be >= 1");
    const Eigen::Index d = tokens.cols();
    const Eigen::Index len = tokens.rows();
    const TokenLayout lay{d};

    // x^p_t = (x_t, p_t) over the BOS-extended sequence x_{0:T}, x_0 = 0.
    Matrix xp = Matrix::Zero(len + 1, d + 1);
    xp.block(1, 0, len, d) = tokens;
    for (Eigen::Index t = 0; t <= len; ++t) xp(t, d) = (t % 2 == 0 ? 1.0 : -1.0) * sharpness * static_cast<double>(t);

    // Scores reach n^2 t^2; softmax max-subtraction keeps them finite and
    // underflows the losers to exact zeros (one-hot saturation).
    AttentionHead h1;
    h1.wq = Matrix::Zero(1, d + 1);
    h1.wq(0, d) = 1.0;
    h1.wk = -h1.wq;
    AttentionHead h2;
    h2.wq = h1.wq;
    h2.wk = h1.wq;

    T0Approximation out;
    out.head1 = attention_weights(h1, xp, Normalization::Softmax);
    out.head2 = attention_weights(h2, xp, Normalization::Softmax);
    const Matrix x_ext = xp.leftCols(d);
    const Matrix prev = out.head1 * x_ext;  // -> x_{t-1}
    const Matrix cur = out.head2 * x_ext;   // -> x_t

    out.tokens = Matrix::Zero(len, lay.width());
    for (Eigen::Index t = 1; t <= len; ++t) {
        const auto a = prev.row(t);
        const auto b = cur.row(t);
        // 2 / (1 + e^{n‖a‖}) -> 1_{a = 0}
        const double gate = 2.0 / (1.0 + std::exp(sharpness * a.norm()));
        auto row = out.tokens.row(t - 1);
        row.segment(lay.prev(), d) = a;
        row(lay.p1()) = gate;
        row.segment(lay.cur(), d) = b;
        row(lay.p2()) = 1.0;
        row.segment(lay.cur_copy(), d) = (1.0 - gate) * b;
    }
    return out;
}

std::vector<Matrix> forward_trace(const TransformerModel& model, const Tokens& tokens) {
    if (tokens.cols() != model.layer.d) throw Error("forward_trace: token dimension does not match the layer");
    if (model.depth < 0) throw Error("forward_trace: negative depth");
    std::vector<Matrix> trace;
    trace.reserve(static_cast<std::size_t>(model.depth) + 1);
    trace.push_back(model.t0_sharpness ? build_t0_approx(tokens, *model.t0_sharpness).tokens : build_t0_exact(tokens));
    for (int k = 0; k < model.depth; ++k) {
        const Matrix& e = trace.back();
        trace.push_back(e + attention_forward(model.layer.heads, e, model.layer.normalization));
    }
    return trace;
}

Matrix model_forward(const TransformerModel& model, const Tokens& tokens) {
    const TokenLayout lay{model.layer.d};
    return forward_trace(model, tokens).back().middleCols(lay.u(), lay.d);
}

EquivalenceReport equivalence_report(const Tokens& tokens, Normalization n, double eta, int depth,
                                     DescentLayerOptions options) {
    const Eigen::Index d = tokens.cols();
    const TokenLayout lay{d};
    const TransformerModel model{build_descent_layer(d, eta, n, options), depth, std::nullopt};
    const auto trace = forward_trace(model, tokens);

    const AttentionMatrix a = build_attention_matrix(kernel_for(n), variant_for(n), tokens);
    const Matrix targets = shifted_targets(tokens);
    DescentState state = initial_state(a, d, eta);

    EquivalenceReport report;
    for (int k = 0; k <= depth; ++k) {
        if (k > 0) state = step(state, a, targets);
        const Matrix diff = trace[static_cast<std::size_t>(k)].middleCols(lay.u(), d) - state.u;
        double gap = 0.0;
        for (Eigen::Index t = 0; t < diff.rows(); ++t) gap = std::max(gap, diff.row(t).norm());
        report.gap_per_depth.push_back(gap);
        report.max_gap = std::max(report.max_gap, gap);
    }
    return report;
}

namespace {

nlohmann::json mat_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix json_mat(const nlohmann::json& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.at(0).size());
    Matrix out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != m) throw Error("ragged weight matrix in JSON");
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows[i][j].get<double>();
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const DescentLayer& layer) {
    auto heads = nlohmann::json::array();
    for (const auto& h : layer.heads) heads.push_back({{"WQ", mat_json(h.wq)}, {"WK", mat_json(h.wk)}, {"WV", mat_json(h.wv)}});
    return {{"d", layer.d}, {"eta", layer.eta}, {"normalization", to_string(layer.normalization)}, {"heads", heads}};
}

DescentLayer descent_layer_from_json(const nlohmann::json& doc) {
    DescentLayer layer;
    layer.d = doc.at("d").get<Eigen::Index>();
    layer.eta = doc.at("eta").get<double>();
    layer.normalization = parse_normalization(doc.at("normalization").get<std::string>());
    for (const auto& h : doc.at("heads"))
        layer.heads.push_back({json_mat(h.at("WQ")), json_mat(h.at("WK")), json_mat(h.at("WV"))});
    return layer;
}

}  // namespace ckd
