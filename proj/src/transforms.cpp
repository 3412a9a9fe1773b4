#include "dagfit/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dagfit {
namespace transforms {

namespace {

DataType common_input_dtype(const Node& n, std::size_t count) {
    const DataType& first = n.input_dtype(0);
    for (std::size_t i = 1; i < count; ++i)
        if (!(n.input_dtype(i) == first))
            throw TypeMismatch("inputs disagree: " + first.to_string() + " vs " +
                               n.input_dtype(i).to_string() + " (input " + std::to_string(i) +
                               ")");
    return first;
}

void require_scalar(const Node& n, std::size_t i) {
    if (!n.input_dtype(i).is_scalar())
        throw TypeMismatch("input " + std::to_string(i) + " must be a scalar, got " +
                           n.input_dtype(i).to_string());
}

} // namespace

Node& make_identity(Graph& g, std::string name) {
    return g.add_node(
        std::move(name), "identity", 1, 1,
        [](const Node& n) { return std::vector<DataType>{n.input_dtype(0)}; },
        [](Node& n) { n.output_data(0).values = n.input_data(0).values; });
}

Node& make_sum(Graph& g, std::string name, std::size_t n_inputs) {
    return g.add_node(
        std::move(name), "sum", n_inputs, 1,
        [n_inputs](const Node& n) {
            return std::vector<DataType>{common_input_dtype(n, n_inputs)};
        },
        [n_inputs](Node& n) {
            auto& out = n.output_data(0).values;
            out = n.input_data(0).values;
            for (std::size_t k = 1; k < n_inputs; ++k) {
                const auto& in = n.input_data(k).values;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
            }
        });
}

Node& make_product(Graph& g, std::string name, std::size_t n_inputs) {
    return g.add_node(
        std::move(name), "product", n_inputs, 1,
        [n_inputs](const Node& n) {
            return std::vector<DataType>{common_input_dtype(n, n_inputs)};
        },
        [n_inputs](Node& n) {
            auto& out = n.output_data(0).values;
            out = n.input_data(0).values;
            for (std::size_t k = 1; k < n_inputs; ++k) {
                const auto& in = n.input_data(k).values;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] *= in[i];
            }
        });
}

Node& make_weighted_sum(Graph& g, std::string name, std::size_t n_terms) {
    return g.add_node(
        std::move(name), "weighted_sum", 2 * n_terms, 1,
        [n_terms](const Node& n) {
            DataType dt = common_input_dtype(n, n_terms);
            for (std::size_t k = 0; k < n_terms; ++k) require_scalar(n, n_terms + k);
            return std::vector<DataType>{dt};
        },
        [n_terms](Node& n) {
            auto& out = n.output_data(0).values;
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t k = 0; k < n_terms; ++k) {
                const double w = n.input_data(n_terms + k).values[0];
                const auto& in = n.input_data(k).values;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * in[i];
            }
        });
}

Node& make_matrix_product(Graph& g, std::string name) {
    return g.add_node(
        std::move(name), "matrix_product", 2, 1,
        [](const Node& n) {
            const DataType& a = n.input_dtype(0);
            const DataType& b = n.input_dtype(1);
            if (a.rank() != 2)
                throw TypeMismatch("left operand must be rank 2, got " + a.to_string());
            if (a.cols() != b.rows())
                throw TypeMismatch("inner dimensions disagree: " + a.to_string() + " x " +
                                   b.to_string());
            if (b.rank() == 1) return std::vector<DataType>{DataType::points(a.rows())};
            return std::vector<DataType>{DataType::points(a.rows(), b.cols())};
        },
        [](Node& n) {
            const DataBuffer& a = n.input_data(0);
            const DataBuffer& b = n.input_data(1);
            DataBuffer& out = n.output_data(0);
            const std::size_t r = a.dtype.rows(), c = a.dtype.cols(), k = b.dtype.cols();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    double s = 0.0;
                    for (std::size_t m = 0; m < c; ++m) s += a.at(i, m) * b.at(m, j);
                    out.values[i * k + j] = s;
                }
        });
}

Node& make_concat(Graph& g, std::string name, std::size_t n_inputs) {
    return g.add_node(
        std::move(name), "concat", n_inputs, 1,
        [n_inputs](const Node& n) {
            std::size_t total = 0;
            for (std::size_t i = 0; i < n_inputs; ++i) {
                if (n.input_dtype(i).rank() != 1)
                    throw TypeMismatch("concat input " + std::to_string(i) +
                                       " must be rank 1, got " + n.input_dtype(i).to_string());
                total += n.input_dtype(i).size();
            }
            return std::vector<DataType>{DataType::points(total)};
        },
        [n_inputs](Node& n) {
            auto& out = n.output_data(0).values;
            std::size_t pos = 0;
            for (std::size_t k = 0; k < n_inputs; ++k) {
                const auto& in = n.input_data(k).values;
                std::copy(in.begin(), in.end(), out.begin() + pos);
                pos += in.size();
            }
        });
}

Node& make_histogram(Graph& g, std::string name, std::vector<double> edges) {
    DataType dt = DataType::histogram(std::move(edges));
    return g.add_node(
        std::move(name), "histogram", 1, 1,
        [dt](const Node& n) {
            const DataType& in = n.input_dtype(0);
            if (in.rank() != 1 || in.size() != dt.size())
                throw TypeMismatch("expected rank-1 input of " + std::to_string(dt.size()) +
                                   " values, got " + in.to_string());
            return std::vector<DataType>{dt};
        },
        [](Node& n) { n.output_data(0).values = n.input_data(0).values; });
}

Node& make_constant(Graph& g, std::string name, DataBuffer value) {
    value.dtype.validate();
    if (value.values.size() != value.dtype.size())
        throw TypeMismatch("constant '" + name + "': buffer size does not match dtype");
    auto stored = std::make_shared<const DataBuffer>(std::move(value));
    return g.add_node(
        std::move(name), "constant", 0, 1,
        [stored](const Node&) { return std::vector<DataType>{stored->dtype}; },
        [stored](Node& n) { n.output_data(0).values = stored->values; });
}

Node& make_constant(Graph& g, std::string name, std::vector<double> values) {
    DataBuffer buf;
    buf.dtype = DataType::points(values.size());
    buf.values = std::move(values);
    return make_constant(g, std::move(name), std::move(buf));
}

Node& make_rebin(Graph& g, std::string name, std::vector<double> new_edges) {
    return g.add_node(
        std::move(name), "rebin", 1, 1,
        [new_edges](const Node& n) {
            const DataType& in = n.input_dtype(0);
            if (in.kind != DataType::Kind::Histogram)
                throw TypeMismatch("rebin input must be a histogram, got " + in.to_string());
            // merge-only: new edges are a subsequence sharing both endpoints
            std::size_t j = 0;
            for (double e : new_edges) {
                while (j < in.edges.size() && in.edges[j] != e) ++j;
                if (j == in.edges.size())
                    throw EdgesNotSubset("rebin edge " + std::to_string(e) +
                                         " not found in input edges");
                ++j;
            }
            if (new_edges.empty() || new_edges.front() != in.edges.front() ||
                new_edges.back() != in.edges.back())
                throw EdgesNotSubset("rebin edges must share the first and last input edge");
            return std::vector<DataType>{DataType::histogram(new_edges)};
        },
        [new_edges](Node& n) {
            const DataBuffer& in = n.input_data(0);
            auto& out = n.output_data(0).values;
            std::fill(out.begin(), out.end(), 0.0);
            const auto& old_edges = in.dtype.edges;
            std::size_t target = 0;
            for (std::size_t b = 0; b < in.values.size(); ++b) {
                // advance target bin until old bin b falls inside it
                while (old_edges[b] >= new_edges[target + 1]) ++target;
                out[target] += in.values[b];
            }
        });
}

Node& make_smear_apply(Graph& g, std::string name) {
    return g.add_node(
        std::move(name), "smear_apply", 2, 1,
        [](const Node& n) {
            const DataType& m = n.input_dtype(0);
            const DataType& h = n.input_dtype(1);
            if (m.rank() != 2 || m.rows() != m.cols())
                throw TypeMismatch("smear matrix must be square, got " + m.to_string());
            if (h.rank() != 1 || h.size() != m.rows())
                throw TypeMismatch("histogram length " + std::to_string(h.size()) +
                                   " does not match matrix " + m.to_string());
            return std::vector<DataType>{h};
        },
        [](Node& n) {
            const DataBuffer& m = n.input_data(0);
            const DataBuffer& h = n.input_data(1);
            auto& out = n.output_data(0).values;
            const std::size_t nb = h.values.size();
            for (std::size_t j = 0; j < nb; ++j) {
                double colsum = 0.0;
                for (std::size_t i = 0; i < nb; ++i) colsum += m.at(i, j);
                if (colsum > 1.0 + 1e-12)
                    throw EvalError("smear matrix column " + std::to_string(j) + " sums to " +
                                    std::to_string(colsum) + " > 1");
            }
            for (std::size_t i = 0; i < nb; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < nb; ++j) s += m.at(i, j) * h.values[j];
                out[i] = s;
            }
        });
}

Node& make_cholesky(Graph& g, std::string name) {
    return g.add_node(
        std::move(name), "cholesky", 1, 1,
        [](const Node& n) {
            const DataType& v = n.input_dtype(0);
            if (v.rank() != 2 || v.rows() != v.cols())
                throw TypeMismatch("cholesky input must be square, got " + v.to_string());
            return std::vector<DataType>{DataType::points(v.rows(), v.cols())};
        },
        [](Node& n) {
            const DataBuffer& in = n.input_data(0);
            const std::size_t nb = in.dtype.rows();
            Matrix v(nb, nb);
            v.data() = in.values;
            Matrix l = cholesky_factor(v);
            n.output_data(0).values = l.data();
        });
}

// ---------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw BadOrder("quadrature order must be >= 1, got " + std::to_string(n));
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) <= 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

std::shared_ptr<const QuadratureRule> make_quadrature_rule(std::vector<double> edges,
                                                           int order) {
    if (order < 1) throw BadOrder("quadrature order must be >= 1, got " + std::to_string(order));
    if (edges.size() < 2) throw BadEdges("need at least 2 edges");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i] < edges[i + 1]))
            throw BadEdges("edges not strictly increasing at index " + std::to_string(i));

    std::vector<double> gx, gw;
    gauss_legendre(order, gx, gw);

    auto rule = std::make_shared<QuadratureRule>();
    rule->order = order;
    const std::size_t nbins = edges.size() - 1;
    rule->points.reserve(nbins * order);
    rule->weights.reserve(nbins * order);
    for (std::size_t b = 0; b < nbins; ++b) {
        const double mid = 0.5 * (edges[b + 1] + edges[b]);
        const double half = 0.5 * (edges[b + 1] - edges[b]);
        for (int j = 0; j < order; ++j) {
            rule->points.push_back(mid + half * gx[j]);
            rule->weights.push_back(half * gw[j]);
        }
    }
    rule->edges = std::move(edges);
    return rule;
}

Node& make_gl_sampler(Graph& g, std::string name, std::shared_ptr<const QuadratureRule> rule) {
    return g.add_node(
        std::move(name), "gl_sampler", 0, 1,
        [rule](const Node&) {
            return std::vector<DataType>{DataType::points(rule->points.size())};
        },
        [rule](Node& n) { n.output_data(0).values = rule->points; });
}

Node& make_gl_collector(Graph& g, std::string name, std::shared_ptr<const QuadratureRule> rule) {
    return g.add_node(
        std::move(name), "gl_collector", 1, 1,
        [rule](const Node& n) {
            const DataType& in = n.input_dtype(0);
            if (in.rank() != 1 || in.size() != rule->points.size())
                throw TypeMismatch("integrand must be rank-1 with " +
                                   std::to_string(rule->points.size()) + " values, got " +
                                   in.to_string());
            return std::vector<DataType>{DataType::histogram(rule->edges)};
        },
        [rule](Node& n) {
            const auto& f = n.input_data(0).values;
            auto& out = n.output_data(0).values;
            const int order = rule->order;
            for (std::size_t b = 0; b < out.size(); ++b) {
                double s = 0.0;
                for (int j = 0; j < order; ++j) {
                    const std::size_t idx = b * order + j;
                    s += rule->weights[idx] * f[idx];
                }
                out[b] = s;
            }
        });
}

// ---------------------------------------------------------------------------

void interp_linear(std::span<const double> xk, std::span<const double> yk,
                   std::span<const double> xq, Extrapolation extrap, std::span<double> out) {
    if (xk.size() != yk.size() || xk.size() < 2)
        throw BadKnots("need at least 2 knots with matching values");
    for (std::size_t i = 0; i + 1 < xk.size(); ++i)
        if (!(xk[i] < xk[i + 1]))
            throw BadKnots("knots not strictly increasing at index " + std::to_string(i));

    const std::size_t nk = xk.size();
    for (std::size_t q = 0; q < xq.size(); ++q) {
        const double x = xq[q];
        if (x <= xk[0]) {
            out[q] = extrap == Extrapolation::Constant
                         ? yk[0]
                         : yk[0] + (yk[1] - yk[0]) / (xk[1] - xk[0]) * (x - xk[0]);
            continue;
        }
        if (x >= xk[nk - 1]) {
            out[q] = extrap == Extrapolation::Constant
                         ? yk[nk - 1]
                         : yk[nk - 1] + (yk[nk - 1] - yk[nk - 2]) / (xk[nk - 1] - xk[nk - 2]) *
                                            (x - xk[nk - 1]);
            continue;
        }
        std::size_t hi = std::upper_bound(xk.begin(), xk.end(), x) - xk.begin();
        const std::size_t lo = hi - 1;
        const double t = (x - xk[lo]) / (xk[hi] - xk[lo]);
        out[q] = yk[lo] + t * (yk[hi] - yk[lo]);
    }
}

Node& make_interp_linear(Graph& g, std::string name, Extrapolation extrap) {
    return g.add_node(
        std::move(name), "interp_linear", 3, 1,
        [](const Node& n) {
            const DataType& xk = n.input_dtype(0);
            const DataType& yk = n.input_dtype(1);
            const DataType& xq = n.input_dtype(2);
            if (xk.rank() != 1 || yk.rank() != 1 || xq.rank() != 1)
                throw TypeMismatch("interpolator inputs must be rank 1");
            if (xk.size() != yk.size() || xk.size() < 2)
                throw BadKnots("need at least 2 knots with matching value count");
            return std::vector<DataType>{DataType::points(xq.size())};
        },
        [extrap](Node& n) {
            interp_linear(n.input_data(0).values, n.input_data(1).values,
                          n.input_data(2).values, extrap, n.output_data(0).values);
        });
}

// ---------------------------------------------------------------------------

Matrix finite_diff_jacobian(Graph& g, OutputPort& target, std::span<Parameter* const> params,
                            double rel_step) {
    for (Parameter* p : params)
        if (p->fixed())
            throw FixedParameter("parameter '" + p->name() + "' has sigma == 0");

    Node& sink = target.node();
    const std::size_t n_out = target.data().size();
    Matrix jac(n_out, params.size());
    std::vector<double> y_plus(n_out);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter* p = params[k];
        const double v0 = p->value();
        const double h = rel_step * p->sigma();

        p->set_value_raw(v0 + h);
        g.touch(sink);
        y_plus = target.data().values;

        p->set_value_raw(v0 - h);
        g.touch(sink);
        const auto& y_minus = target.data().values;

        for (std::size_t i = 0; i < n_out; ++i)
            jac(i, k) = (y_plus[i] - y_minus[i]) / (2.0 * h);

        p->set_value_raw(v0);
    }
    g.touch(sink); // resettle at the original point
    return jac;
}

} // namespace transforms
} // namespace dagfit
