#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakscope/model.hpp"

namespace peakscope {

/// Syntax error with the byte offset into the source text.
struct parse_error : std::runtime_error {
    std::size_t offset;
    parse_error(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (byte " + std::to_string(off) + ")"), offset(off) {}
};

/// Evaluation-domain error (log of a nonpositive value, division by zero, ...)
/// carrying the offending subexpression.
struct eval_error : std::runtime_error {
    std::string subexpression;
    eval_error(const std::string& msg, std::string subexpr)
        : std::runtime_error(msg + " in subexpression '" + subexpr + "'"), subexpression(std::move(subexpr)) {}
};

/// Arithmetic expressions over x1..xn with exact gradients by forward-mode
/// dual numbers. Immutable after parsing; evaluation is reentrant.
class expression {
  public:
    static constexpr int max_dimension = 8;

    enum class node_kind : unsigned char { number, variable, unary, binary, call };
    enum class unary_op : unsigned char { negate };
    enum class binary_op : unsigned char { add, sub, mul, div, pow };
    enum class func : unsigned char { exp, log, sqrt, sin, cos, tanh, abs };

    struct node {
        node_kind kind;
        double number = 0.0;
        int var = -1;  // 0-based variable index
        unary_op un{};
        binary_op bin{};
        func fn{};
        int lhs = -1;
        int rhs = -1;
    };

    struct eval_result {
        double value;
        std::vector<double> gradient;
        bool nonsmooth;  // hit a kink (abs at 0, sqrt at 0)
    };

    expression() = default;

    static expression parse(std::string_view text, int dimension);

    int dimension() const { return dim_; }

    /// Minimal-parenthesis pretty printer; reparses to a structurally
    /// identical tree.
    std::string to_string() const { return nodes_.empty() ? std::string() : print(root_, 0); }

    eval_result eval_with_gradient(std::span<const double> z) const;

    double eval(std::span<const double> z) const { return eval_with_gradient(z).value; }

    bool operator==(const expression& other) const {
        if (dim_ != other.dim_ || nodes_.size() != other.nodes_.size()) return false;
        return equal_nodes(root_, other, other.root_);
    }

  private:
    std::vector<node> nodes_;
    int root_ = -1;
    int dim_ = 0;

    bool equal_nodes(int a, const expression& o, int b) const {
        if ((a < 0) != (b < 0)) return false;
        if (a < 0) return true;
        const node& na = nodes_[static_cast<std::size_t>(a)];
        const node& nb = o.nodes_[static_cast<std::size_t>(b)];
        if (na.kind != nb.kind) return false;
        switch (na.kind) {
            case node_kind::number: return na.number == nb.number;
            case node_kind::variable: return na.var == nb.var;
            case node_kind::unary: return na.un == nb.un && equal_nodes(na.lhs, o, nb.lhs);
            case node_kind::call: return na.fn == nb.fn && equal_nodes(na.lhs, o, nb.lhs);
            case node_kind::binary:
                return na.bin == nb.bin && equal_nodes(na.lhs, o, nb.lhs) && equal_nodes(na.rhs, o, nb.rhs);
        }
        return false;
    }

    // Precedence levels: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow, 4 atom.
    static int precedence(const node& nd) {
        switch (nd.kind) {
            case node_kind::binary:
                switch (nd.bin) {
                    case binary_op::add:
                    case binary_op::sub: return 0;
                    case binary_op::mul:
                    case binary_op::div: return 1;
                    case binary_op::pow: return 3;
                }
                return 0;
            case node_kind::unary: return 2;
            default: return 4;
        }
    }

    std::string print(int idx, int parent_prec) const {
        const node& nd = nodes_[static_cast<std::size_t>(idx)];
        std::string out;
        switch (nd.kind) {
            case node_kind::number: {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", nd.number);
                out = buf;
                break;
            }
            case node_kind::variable:
                out = "x" + std::to_string(nd.var + 1);
                break;
            case node_kind::unary:
                out = "-" + print(nd.lhs, 2);
                break;
            case node_kind::call:
                out = std::string(func_name(nd.fn)) + "(" + print(nd.lhs, 0) + ")";
                break;
            case node_kind::binary: {
                int prec = precedence(nd);
                // left-assoc except pow; force parens on same-precedence right
                // children (and on pow's left) so the printout reparses 1:1.
                int lp = nd.bin == binary_op::pow ? prec + 1 : prec;
                int rp = nd.bin == binary_op::pow ? prec : prec + 1;
                out = print(nd.lhs, lp) + " " + op_name(nd.bin) + " " + print(nd.rhs, rp);
                if (prec < parent_prec) out = "(" + out + ")";
                return out;
            }
        }
        if (precedence(nd) < parent_prec) out = "(" + out + ")";
        return out;
    }

    static const char* op_name(binary_op op) {
        switch (op) {
            case binary_op::add: return "+";
            case binary_op::sub: return "-";
            case binary_op::mul: return "*";
            case binary_op::div: return "/";
            case binary_op::pow: return "^";
        }
        return "?";
    }

    static const char* func_name(func f) {
        switch (f) {
            case func::exp: return "exp";
            case func::log: return "log";
            case func::sqrt: return "sqrt";
            case func::sin: return "sin";
            case func::cos: return "cos";
            case func::tanh: return "tanh";
            case func::abs: return "abs";
        }
        return "?";
    }

    static std::optional<func> func_by_name(std::string_view name) {
        if (name == "exp") return func::exp;
        if (name == "log") return func::log;
        if (name == "sqrt") return func::sqrt;
        if (name == "sin") return func::sin;
        if (name == "cos") return func::cos;
        if (name == "tanh") return func::tanh;
        if (name == "abs") return func::abs;
        return std::nullopt;
    }

    class parser;
    friend class parser;
};

class expression::parser {
  public:
    parser(std::string_view text, int dim, expression& out) : text_(text), dim_(dim), out_(out) {}

    void run() {
        skip_ws();
        out_.root_ = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) throw parse_error("unexpected trailing input", pos_);
        out_.dim_ = dim_;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int dim_;
    expression& out_;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    int add_node(node nd) {
        out_.nodes_.push_back(nd);
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    int parse_sum() {
        int lhs = parse_product();
        for (;;) {
            skip_ws();
            if (eof() || (peek() != '+' && peek() != '-')) return lhs;
            char op = text_[pos_++];
            int rhs = parse_product();
            node nd;
            nd.kind = node_kind::binary;
            nd.bin = op == '+' ? binary_op::add : binary_op::sub;
            nd.lhs = lhs;
            nd.rhs = rhs;
            lhs = add_node(nd);
        }
    }

    int parse_product() {
        int lhs = parse_unary();
        for (;;) {
            skip_ws();
            if (eof() || (peek() != '*' && peek() != '/')) return lhs;
            char op = text_[pos_++];
            int rhs = parse_unary();
            node nd;
            nd.kind = node_kind::binary;
            nd.bin = op == '*' ? binary_op::mul : binary_op::div;
            nd.lhs = lhs;
            nd.rhs = rhs;
            lhs = add_node(nd);
        }
    }

    int parse_unary() {
        skip_ws();
        if (!eof() && peek() == '-') {
            ++pos_;
            int inner = parse_unary();
            node nd;
            nd.kind = node_kind::unary;
            nd.un = unary_op::negate;
            nd.lhs = inner;
            return add_node(nd);
        }
        return parse_power();
    }

    // '^' binds tighter than unary minus and is right-associative; the
    // exponent must be a constant (optionally signed, possibly a further
    // constant power).
    int parse_power() {
        int base = parse_atom();
        skip_ws();
        if (eof() || peek() != '^') return base;
        ++pos_;
        std::size_t at = pos_;
        int expo = parse_exponent();
        if (!constant_subtree(expo)) throw parse_error("exponent must be a constant", at);
        node nd;
        nd.kind = node_kind::binary;
        nd.bin = binary_op::pow;
        nd.lhs = base;
        nd.rhs = expo;
        return add_node(nd);
    }

    int parse_exponent() {
        skip_ws();
        if (!eof() && peek() == '-') {
            ++pos_;
            int inner = parse_exponent();
            node nd;
            nd.kind = node_kind::unary;
            nd.un = unary_op::negate;
            nd.lhs = inner;
            return add_node(nd);
        }
        int base = parse_atom();
        skip_ws();
        if (!eof() && peek() == '^') {
            ++pos_;
            int expo = parse_exponent();
            node nd;
            nd.kind = node_kind::binary;
            nd.bin = binary_op::pow;
            nd.lhs = base;
            nd.rhs = expo;
            return add_node(nd);
        }
        return base;
    }

    bool constant_subtree(int idx) const {
        const node& nd = out_.nodes_[static_cast<std::size_t>(idx)];
        switch (nd.kind) {
            case node_kind::number: return true;
            case node_kind::unary: return constant_subtree(nd.lhs);
            case node_kind::binary: return constant_subtree(nd.lhs) && constant_subtree(nd.rhs);
            default: return false;
        }
    }

    int parse_atom() {
        skip_ws();
        if (eof()) throw parse_error("unexpected end of input", pos_);
        char c = peek();
        if (c == '(') {
            ++pos_;
            int inner = parse_sum();
            skip_ws();
            if (eof() || peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw parse_error(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
                pos_ = mark;  // 'e' belonged to something else
            else
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        std::string tok(text_.substr(start, pos_ - start));
        char* end = nullptr;
        double value = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw parse_error("malformed number '" + tok + "'", start);
        node nd;
        nd.kind = node_kind::number;
        nd.number = value;
        return add_node(nd);
    }

    int parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string_view name = text_.substr(start, pos_ - start);
        if (name.size() >= 2 && name[0] == 'x' &&
            std::isdigit(static_cast<unsigned char>(name[1]))) {
            int index = 0;
            for (std::size_t i = 1; i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i])))
                    throw parse_error("malformed variable '" + std::string(name) + "'", start);
                index = index * 10 + (name[i] - '0');
            }
            if (index < 1) throw parse_error("variable indices start at x1", start);
            if (index > dim_)
                throw parse_error("variable x" + std::to_string(index) + " exceeds dimension " +
                                      std::to_string(dim_),
                                  start);
            node nd;
            nd.kind = node_kind::variable;
            nd.var = index - 1;
            return add_node(nd);
        }
        if (auto fn = func_by_name(name)) {
            skip_ws();
            if (eof() || peek() != '(')
                throw parse_error("function '" + std::string(name) + "' needs an argument list", pos_);
            ++pos_;
            int arg = parse_sum();
            skip_ws();
            if (eof() || peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
            node nd;
            nd.kind = node_kind::call;
            nd.fn = *fn;
            nd.lhs = arg;
            return add_node(nd);
        }
        throw parse_error("unknown identifier '" + std::string(name) + "'", start);
    }
};

inline expression expression::parse(std::string_view text, int dimension) {
    if (text.empty()) throw parse_error("empty expression", 0);
    if (dimension < 1 || dimension > max_dimension)
        throw input_error("expression dimension must be in [1, " + std::to_string(max_dimension) + "]");
    expression e;
    parser p(text, dimension, e);
    p.run();
    return e;
}

inline expression::eval_result expression::eval_with_gradient(std::span<const double> z) const {
    if (static_cast<int>(z.size()) != dim_) throw input_error("evaluation point has wrong dimension");
    for (double v : z)
        if (!is_finite(v)) throw input_error("evaluation point must be finite");

    struct dual {
        double v;
        std::array<double, max_dimension> g;
    };
    std::vector<dual> vals(nodes_.size());
    bool nonsmooth = false;

    auto zero_grad = [&]() {
        std::array<double, max_dimension> g{};
        return g;
    };

    // Children precede parents in nodes_, so a single left-to-right sweep
    // evaluates the whole tree.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const node& nd = nodes_[i];
        dual& out = vals[i];
        switch (nd.kind) {
            case node_kind::number:
                out.v = nd.number;
                out.g = zero_grad();
                break;
            case node_kind::variable:
                out.v = z[static_cast<std::size_t>(nd.var)];
                out.g = zero_grad();
                out.g[static_cast<std::size_t>(nd.var)] = 1.0;
                break;
            case node_kind::unary: {
                const dual& a = vals[static_cast<std::size_t>(nd.lhs)];
                out.v = -a.v;
                for (int k = 0; k < dim_; ++k) out.g[static_cast<std::size_t>(k)] = -a.g[static_cast<std::size_t>(k)];
                break;
            }
            case node_kind::binary: {
                const dual& a = vals[static_cast<std::size_t>(nd.lhs)];
                const dual& b = vals[static_cast<std::size_t>(nd.rhs)];
                switch (nd.bin) {
                    case binary_op::add:
                        out.v = a.v + b.v;
                        for (int k = 0; k < dim_; ++k)
                            out.g[static_cast<std::size_t>(k)] =
                                a.g[static_cast<std::size_t>(k)] + b.g[static_cast<std::size_t>(k)];
                        break;
                    case binary_op::sub:
                        out.v = a.v - b.v;
                        for (int k = 0; k < dim_; ++k)
                            out.g[static_cast<std::size_t>(k)] =
                                a.g[static_cast<std::size_t>(k)] - b.g[static_cast<std::size_t>(k)];
                        break;
                    case binary_op::mul:
                        out.v = a.v * b.v;
                        for (int k = 0; k < dim_; ++k)
                            out.g[static_cast<std::size_t>(k)] = a.g[static_cast<std::size_t>(k)] * b.v +
                                                                 a.v * b.g[static_cast<std::size_t>(k)];
                        break;
                    case binary_op::div:
                        if (b.v == 0.0) throw eval_error("division by zero", print(static_cast<int>(i), 0));
                        out.v = a.v / b.v;
                        for (int k = 0; k < dim_; ++k)
                            out.g[static_cast<std::size_t>(k)] =
                                (a.g[static_cast<std::size_t>(k)] -
                                 out.v * b.g[static_cast<std::size_t>(k)]) /
                                b.v;
                        break;
                    case binary_op::pow: {
                        const double e = b.v;  // constant by construction
                        if (a.v < 0.0 && e != std::floor(e))
                            throw eval_error("fractional power of a negative base",
                                             print(static_cast<int>(i), 0));
                        if (a.v == 0.0 && e < 0.0)
                            throw eval_error("zero raised to a negative power", print(static_cast<int>(i), 0));
                        out.v = std::pow(a.v, e);
                        double dfac;
                        if (e == 0.0)
                            dfac = 0.0;
                        else if (a.v == 0.0)
                            dfac = e == 1.0 ? 1.0 : (e > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
                        else
                            dfac = e * std::pow(a.v, e - 1.0);
                        if (std::isinf(dfac)) {
                            bool inner_flat = true;
                            for (int k = 0; k < dim_; ++k)
                                inner_flat = inner_flat && a.g[static_cast<std::size_t>(k)] == 0.0;
                            if (!inner_flat)
                                throw eval_error("power has unbounded derivative at 0",
                                                 print(static_cast<int>(i), 0));
                            dfac = 0.0;
                            nonsmooth = true;
                        }
                        for (int k = 0; k < dim_; ++k)
                            out.g[static_cast<std::size_t>(k)] = dfac * a.g[static_cast<std::size_t>(k)];
                        break;
                    }
                }
                break;
            }
            case node_kind::call: {
                const dual& a = vals[static_cast<std::size_t>(nd.lhs)];
                double dfac = 0.0;
                switch (nd.fn) {
                    case func::exp:
                        out.v = std::exp(a.v);
                        dfac = out.v;
                        break;
                    case func::log:
                        if (a.v <= 0.0)
                            throw eval_error("log of a nonpositive value", print(static_cast<int>(i), 0));
                        out.v = std::log(a.v);
                        dfac = 1.0 / a.v;
                        break;
                    case func::sqrt:
                        if (a.v < 0.0)
                            throw eval_error("sqrt of a negative value", print(static_cast<int>(i), 0));
                        out.v = std::sqrt(a.v);
                        if (a.v == 0.0) {
                            // One-sided kink: report subgradient 0, flag it.
                            dfac = 0.0;
                            nonsmooth = true;
                        } else {
                            dfac = 0.5 / out.v;
                        }
                        break;
                    case func::sin:
                        out.v = std::sin(a.v);
                        dfac = std::cos(a.v);
                        break;
                    case func::cos:
                        out.v = std::cos(a.v);
                        dfac = -std::sin(a.v);
                        break;
                    case func::tanh:
                        out.v = std::tanh(a.v);
                        dfac = 1.0 - out.v * out.v;
                        break;
                    case func::abs:
                        out.v = std::abs(a.v);
                        if (a.v == 0.0) {
                            dfac = 0.0;  // subgradient choice at the kink
                            nonsmooth = true;
                        } else {
                            dfac = a.v > 0.0 ? 1.0 : -1.0;
                        }
                        break;
                }
                for (int k = 0; k < dim_; ++k)
                    out.g[static_cast<std::size_t>(k)] = dfac * a.g[static_cast<std::size_t>(k)];
                break;
            }
        }
    }

    const dual& root = vals[static_cast<std::size_t>(root_)];
    eval_result res;
    res.value = root.v;
    res.gradient.assign(root.g.begin(), root.g.begin() + dim_);
    res.nonsmooth = nonsmooth;
    return res;
}

struct scan_box {
    std::vector<std::array<double, 2>> axes;  // {lo, hi} per coordinate

    int dimension() const { return static_cast<int>(axes.size()); }
    void validate() const {
        if (axes.empty()) throw input_error("scan box must have at least one axis");
        for (const auto& ax : axes) {
            if (!is_finite(ax[0]) || !is_finite(ax[1]) || !(ax[0] < ax[1]))
                throw input_error("scan box axes need lo < hi");
        }
    }
    double diameter() const {
        double d = 0.0;
        for (const auto& ax : axes) d = std::max(d, ax[1] - ax[0]);
        return d;
    }
};

/// Sampled lower bounds of the three coefficients over a box.
struct positivity_certificate {
    double alpha_min;
    double V_min;
    double K_min;
};

/// The coefficient landscape alpha, V, K with its dimension and a cached
/// positivity certificate for the last certified box.
struct coefficient_field {
    expression alpha;
    expression V;
    expression K;
    int dimension = 0;

    mutable std::optional<positivity_certificate> certificate;

    static coefficient_field from_strings(const std::string& alpha_text, const std::string& V_text,
                                          const std::string& K_text, int n) {
        coefficient_field f;
        f.alpha = expression::parse(alpha_text, n);
        f.V = expression::parse(V_text, n);
        f.K = expression::parse(K_text, n);
        f.dimension = n;
        return f;
    }

    /// Dense sampling on the box; throws naming the first coefficient whose
    /// sampled minimum drops below the floor.
    positivity_certificate certify_positive(const scan_box& box, int samples_per_axis = 9,
                                            double floor = 1e-8) const {
        box.validate();
        if (box.dimension() != dimension) throw input_error("box dimension mismatch");
        if (samples_per_axis < 2) throw input_error("need at least 2 samples per axis");

        positivity_certificate cert{std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity()};
        std::vector<double> z(static_cast<std::size_t>(dimension));
        std::vector<int> idx(static_cast<std::size_t>(dimension), 0);
        const long total = static_cast<long>(std::pow(samples_per_axis, dimension));
        for (long t = 0; t < total; ++t) {
            long rem = t;
            for (int k = 0; k < dimension; ++k) {
                idx[static_cast<std::size_t>(k)] = static_cast<int>(rem % samples_per_axis);
                rem /= samples_per_axis;
            }
            for (int k = 0; k < dimension; ++k) {
                const auto& ax = box.axes[static_cast<std::size_t>(k)];
                z[static_cast<std::size_t>(k)] =
                    ax[0] + (ax[1] - ax[0]) * idx[static_cast<std::size_t>(k)] / (samples_per_axis - 1);
            }
            cert.alpha_min = std::min(cert.alpha_min, alpha.eval(z));
            cert.V_min = std::min(cert.V_min, V.eval(z));
            cert.K_min = std::min(cert.K_min, K.eval(z));
        }
        const char* bad = nullptr;
        double value = 0.0;
        if (cert.alpha_min < floor) { bad = "alpha"; value = cert.alpha_min; }
        else if (cert.V_min < floor) { bad = "V"; value = cert.V_min; }
        else if (cert.K_min < floor) { bad = "K"; value = cert.K_min; }
        if (bad)
            throw input_error(std::string("coefficient ") + bad + " is not positive on the scan box (min " +
                              detail::fmt_g(value) + " < floor " + detail::fmt_g(floor) + ")");
        certificate = cert;
        return cert;
    }
};

}  // namespace peakscope
