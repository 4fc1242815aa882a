#include "terra/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace terra::nn {

namespace {

Value make_node(Tensor value, std::vector<Value> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p && p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(fn);
    }
    return n;
}

void accumulate(const Value& parent, const Tensor& g) {
    if (!parent->requires_grad) return;
    parent->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) parent->grad.data[i] += g.data[i];
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
    require(a->value.same_shape(b->value), std::string(op) + ": shape mismatch");
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace

Value make_input(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return n;
}

Value make_param(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    n->name = std::move(name);
    n->ensure_grad();
    return n;
}

void zero_grad(const std::vector<Value>& params) {
    for (const auto& p : params) {
        p->ensure_grad();
        std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
}

void backward(const Value& loss) {
    require(loss && loss->value.numel() == 1, "backward needs a scalar loss");
    if (!loss->requires_grad) return;

    // Reverse post-order over the recorded DAG = topological order with every
    // consumer visited before its producers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited{loss.get()};
    struct Frame {
        Node* node;
        std::size_t next = 0;
    };
    std::vector<Frame> stack{{loss.get()}};
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            Node* p = f.node->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->ensure_grad();
    loss->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Value add(const Value& a, const Value& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a, self.grad);
        accumulate(b, self.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a, self.grad);
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.data.size(); ++i)
                b->grad.data[i] -= self.grad.data[i];
        }
    });
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.data.size(); ++i)
                a->grad.data[i] += self.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.data.size(); ++i)
                b->grad.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

Value scale(const Value& a, double s) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= s;
    return make_node(std::move(out), {a}, [a, s](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.data.size(); ++i)
            a->grad.data[i] += s * self.grad.data[i];
    });
}

Value neg(const Value& a) { return scale(a, -1.0); }

namespace {

// y = f(x) with dy/dx expressible from x and y.
Value unary_op(const Value& a, double (*f)(double), double (*dfdx)(double, double)) {
    Tensor out = a->value;
    for (auto& v : out.data) v = f(v);
    return make_node(std::move(out), {a}, [a, dfdx](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < self.grad.data.size(); ++i)
            a->grad.data[i] += self.grad.data[i] * dfdx(a->value.data[i], self.value.data[i]);
    });
}

}  // namespace

Value exp_of(const Value& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value relu(const Value& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value sigmoid(const Value& a) {
    return unary_op(
        a, [](double x) { return stable_sigmoid(x); },
        [](double, double y) { return y * (1.0 - y); });
}

Value silu(const Value& a) {
    return unary_op(
        a, [](double x) { return x * stable_sigmoid(x); },
        [](double x, double) {
            const double s = stable_sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Value softplus(const Value& a) {
    return unary_op(
        a, [](double x) { return stable_softplus(x); },
        [](double x, double) { return stable_sigmoid(x); });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Value reshape(const Value& a, std::vector<int> shape) {
    require(Tensor::count(shape) == a->value.numel(), "reshape: element count mismatch");
    Tensor out(std::move(shape), a->value.data);
    return make_node(std::move(out), {a}, [a](Node& self) { accumulate(a, self.grad); });
}

Value slice_cols(const Value& a, int c0, int c1) {
    require(a->value.ndim() == 2, "slice_cols expects a 2-d tensor");
    const int rows = a->value.dim(0), cols = a->value.dim(1);
    require(0 <= c0 && c0 < c1 && c1 <= cols, "slice_cols: bad column range");
    Tensor out({rows, c1 - c0});
    for (int r = 0; r < rows; ++r)
        for (int c = c0; c < c1; ++c) out.at2(r, c - c0) = a->value.at2(r, c);
    return make_node(std::move(out), {a}, [a, c0, c1, rows](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < rows; ++r)
            for (int c = c0; c < c1; ++c) a->grad.at2(r, c) += self.grad.at2(r, c - c0);
    });
}

Value concat_cols(const Value& a, const Value& b) {
    require(a->value.ndim() == 2 && b->value.ndim() == 2 && a->value.dim(0) == b->value.dim(0),
            "concat_cols: incompatible shapes");
    const int rows = a->value.dim(0), ca = a->value.dim(1), cb = b->value.dim(1);
    Tensor out({rows, ca + cb});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < ca; ++c) out.at2(r, c) = a->value.at2(r, c);
        for (int c = 0; c < cb; ++c) out.at2(r, ca + c) = b->value.at2(r, c);
    }
    return make_node(std::move(out), {a, b}, [a, b, rows, ca, cb](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < ca; ++c) a->grad.at2(r, c) += self.grad.at2(r, c);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cb; ++c) b->grad.at2(r, c) += self.grad.at2(r, ca + c);
        }
    });
}

Value last_row(const Value& a) {
    require(a->value.ndim() == 2 && a->value.dim(0) >= 1, "last_row expects a non-empty 2-d tensor");
    const int rows = a->value.dim(0), cols = a->value.dim(1);
    Tensor out({1, cols});
    for (int c = 0; c < cols; ++c) out.at2(0, c) = a->value.at2(rows - 1, c);
    return make_node(std::move(out), {a}, [a, rows, cols](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int c = 0; c < cols; ++c) a->grad.at2(rows - 1, c) += self.grad.at2(0, c);
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
    require(a->value.ndim() == 2 && b->value.ndim() == 2 && a->value.dim(1) == b->value.dim(0),
            "matmul: incompatible shapes");
    const int n = a->value.dim(0), k = a->value.dim(1), m = b->value.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a->value.at2(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < m; ++j) out.at2(i, j) += av * b->value.at2(p, j);
        }
    return make_node(std::move(out), {a, b}, [a, b, n, k, m](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (int j = 0; j < m; ++j) acc += self.grad.at2(i, j) * b->value.at2(p, j);
                    a->grad.at2(i, p) += acc;
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    const double av = a->value.at2(i, p);
                    if (av == 0.0) continue;
                    for (int j = 0; j < m; ++j) b->grad.at2(p, j) += av * self.grad.at2(i, j);
                }
        }
    });
}

Value linear(const Value& x, const Value& weight, const Value& bias) {
    require(x->value.ndim() == 2 && weight->value.ndim() == 2 &&
                x->value.dim(1) == weight->value.dim(1),
            "linear: incompatible shapes");
    const int n = x->value.dim(0), in = x->value.dim(1), out_dim = weight->value.dim(0);
    if (bias)
        require(bias->value.numel() == static_cast<std::size_t>(out_dim), "linear: bad bias size");

    Tensor out({n, out_dim});
    for (int i = 0; i < n; ++i) {
        const double* xr = &x->value.data[static_cast<std::size_t>(i) * in];
        for (int o = 0; o < out_dim; ++o) {
            const double* wr = &weight->value.data[static_cast<std::size_t>(o) * in];
            double acc = bias ? bias->value.data[static_cast<std::size_t>(o)] : 0.0;
            for (int p = 0; p < in; ++p) acc += xr[p] * wr[p];
            out.at2(i, o) = acc;
        }
    }
    std::vector<Value> parents = bias ? std::vector<Value>{x, weight, bias}
                                      : std::vector<Value>{x, weight};
    return make_node(std::move(out), std::move(parents),
                     [x, weight, bias, n, in, out_dim](Node& self) {
                         if (x->requires_grad) {
                             x->ensure_grad();
                             for (int i = 0; i < n; ++i)
                                 for (int o = 0; o < out_dim; ++o) {
                                     const double g = self.grad.at2(i, o);
                                     if (g == 0.0) continue;
                                     const double* wr =
                                         &weight->value.data[static_cast<std::size_t>(o) * in];
                                     double* xg = &x->grad.data[static_cast<std::size_t>(i) * in];
                                     for (int p = 0; p < in; ++p) xg[p] += g * wr[p];
                                 }
                         }
                         if (weight->requires_grad) {
                             weight->ensure_grad();
                             for (int i = 0; i < n; ++i) {
                                 const double* xr = &x->value.data[static_cast<std::size_t>(i) * in];
                                 for (int o = 0; o < out_dim; ++o) {
                                     const double g = self.grad.at2(i, o);
                                     if (g == 0.0) continue;
                                     double* wg =
                                         &weight->grad.data[static_cast<std::size_t>(o) * in];
                                     for (int p = 0; p < in; ++p) wg[p] += g * xr[p];
                                 }
                             }
                         }
                         if (bias && bias->requires_grad) {
                             bias->ensure_grad();
                             for (int i = 0; i < n; ++i)
                                 for (int o = 0; o < out_dim; ++o)
                                     bias->grad.data[static_cast<std::size_t>(o)] +=
                                         self.grad.at2(i, o);
                         }
                     });
}

// ---------------------------------------------------------------------------
// neural ops
// ---------------------------------------------------------------------------

Value conv2d(const Value& x, const Value& weight, const Value& bias) {
    require(x->value.ndim() == 4 && weight->value.ndim() == 4, "conv2d: expects 4-d input and weight");
    const int n = x->value.dim(0), cin = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    const int cout = weight->value.dim(0), k = weight->value.dim(2);
    require(weight->value.dim(1) == cin && weight->value.dim(3) == k, "conv2d: weight shape mismatch");
    require(k % 2 == 1, "conv2d: kernel size must be odd");
    require(h >= k && w >= k, "conv2d: spatial dims smaller than kernel");
    require(bias && bias->value.numel() == static_cast<std::size_t>(cout), "conv2d: bad bias");

    const int ho = h - k + 1, wo = w - k + 1;
    const auto xat = [&](const Tensor& t, int a, int b, int c, int d) -> double {
        return t.data[((static_cast<std::size_t>(a) * cin + b) * h + c) * w + d];
    };
    const auto wat = [&](const Tensor& t, int a, int b, int c, int d) -> double {
        return t.data[((static_cast<std::size_t>(a) * cin + b) * k + c) * k + d];
    };

    Tensor out({n, cout, ho, wo});
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < cout; ++o) {
            double* op = &out.data[(static_cast<std::size_t>(i) * cout + o) * ho * wo];
            const double bv = bias->value.data[static_cast<std::size_t>(o)];
            for (int e = 0; e < ho * wo; ++e) op[e] = bv;
            for (int c = 0; c < cin; ++c)
                for (int ki = 0; ki < k; ++ki)
                    for (int kj = 0; kj < k; ++kj) {
                        const double wv = wat(weight->value, o, c, ki, kj);
                        if (wv == 0.0) continue;
                        for (int y = 0; y < ho; ++y) {
                            const double* xp =
                                &x->value.data[((static_cast<std::size_t>(i) * cin + c) * h + y + ki) * w + kj];
                            double* orow = op + static_cast<std::size_t>(y) * wo;
                            for (int xi = 0; xi < wo; ++xi) orow[xi] += wv * xp[xi];
                        }
                    }
        }

    return make_node(
        std::move(out), {x, weight, bias},
        [x, weight, bias, n, cin, cout, h, w, k, ho, wo, xat, wat](Node& self) {
            const Tensor& g = self.grad;
            const auto gat = [&](int a, int b, int c, int d) -> double {
                return g.data[((static_cast<std::size_t>(a) * cout + b) * ho + c) * wo + d];
            };
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < cout; ++o) {
                        double acc = 0.0;
                        for (int y = 0; y < ho; ++y)
                            for (int xi = 0; xi < wo; ++xi) acc += gat(i, o, y, xi);
                        bias->grad.data[static_cast<std::size_t>(o)] += acc;
                    }
            }
            if (weight->requires_grad) {
                weight->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < cout; ++o)
                        for (int c = 0; c < cin; ++c)
                            for (int ki = 0; ki < k; ++ki)
                                for (int kj = 0; kj < k; ++kj) {
                                    double acc = 0.0;
                                    for (int y = 0; y < ho; ++y)
                                        for (int xi = 0; xi < wo; ++xi)
                                            acc += gat(i, o, y, xi) *
                                                   xat(x->value, i, c, y + ki, xi + kj);
                                    weight->grad
                                        .data[((static_cast<std::size_t>(o) * cin + c) * k + ki) * k + kj] += acc;
                                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < cout; ++o)
                        for (int c = 0; c < cin; ++c)
                            for (int ki = 0; ki < k; ++ki)
                                for (int kj = 0; kj < k; ++kj) {
                                    const double wv = wat(weight->value, o, c, ki, kj);
                                    if (wv == 0.0) continue;
                                    for (int y = 0; y < ho; ++y) {
                                        double* xg =
                                            &x->grad.data[((static_cast<std::size_t>(i) * cin + c) * h + y + ki) * w + kj];
                                        for (int xi = 0; xi < wo; ++xi)
                                            xg[xi] += wv * gat(i, o, y, xi);
                                    }
                                }
            }
        });
}

Value causal_conv1d(const Value& x, const Value& weight, const Value& bias) {
    require(x->value.ndim() == 2 && weight->value.ndim() == 2, "causal_conv1d: bad shapes");
    const int T = x->value.dim(0), C = x->value.dim(1), k = weight->value.dim(1);
    require(weight->value.dim(0) == C, "causal_conv1d: weight channels mismatch");
    require(bias->value.numel() == static_cast<std::size_t>(C), "causal_conv1d: bad bias");

    Tensor out({T, C});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            double acc = bias->value.data[static_cast<std::size_t>(c)];
            for (int j = 0; j < k; ++j) {
                const int src = t - (k - 1) + j;
                if (src >= 0) acc += weight->value.at2(c, j) * x->value.at2(src, c);
            }
            out.at2(t, c) = acc;
        }
    return make_node(std::move(out), {x, weight, bias}, [x, weight, bias, T, C, k](Node& self) {
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c)
                    bias->grad.data[static_cast<std::size_t>(c)] += self.grad.at2(t, c);
        }
        if (weight->requires_grad) {
            weight->ensure_grad();
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    const double g = self.grad.at2(t, c);
                    if (g == 0.0) continue;
                    for (int j = 0; j < k; ++j) {
                        const int src = t - (k - 1) + j;
                        if (src >= 0) weight->grad.at2(c, j) += g * x->value.at2(src, c);
                    }
                }
        }
        if (x->requires_grad) {
            x->ensure_grad();
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    const double g = self.grad.at2(t, c);
                    if (g == 0.0) continue;
                    for (int j = 0; j < k; ++j) {
                        const int src = t - (k - 1) + j;
                        if (src >= 0) x->grad.at2(src, c) += g * weight->value.at2(c, j);
                    }
                }
        }
    });
}

Value batch_norm(const Value& x, const Value& gamma, const Value& beta, BatchNormState& state,
                 bool training) {
    require(x->value.ndim() == 4, "batch_norm: expects an N x C x H x W batch");
    const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    require(gamma->value.numel() == static_cast<std::size_t>(c) &&
                beta->value.numel() == static_cast<std::size_t>(c),
            "batch_norm: scale/shift size mismatch");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(n) * static_cast<double>(plane);

    const auto idx = [&](int i, int ch, std::size_t e) {
        return (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(ch)) * plane + e;
    };

    if (!training) {
        require(state.initialized, "batch_norm: eval mode before any training update");
        Tensor out = x->value;
        std::vector<double> inv_std(static_cast<std::size_t>(c));
        for (int ch = 0; ch < c; ++ch)
            inv_std[static_cast<std::size_t>(ch)] =
                1.0 / std::sqrt(state.running_var.data[static_cast<std::size_t>(ch)] + state.eps);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double mu = state.running_mean.data[static_cast<std::size_t>(ch)];
                const double a = gamma->value.data[static_cast<std::size_t>(ch)] *
                                 inv_std[static_cast<std::size_t>(ch)];
                const double b = beta->value.data[static_cast<std::size_t>(ch)];
                for (std::size_t e = 0; e < plane; ++e)
                    out.data[idx(i, ch, e)] = a * (x->value.data[idx(i, ch, e)] - mu) + b;
            }
        auto mean = state.running_mean, var = state.running_var;
        const double eps = state.eps;
        return make_node(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, mean, var, eps, n, c, plane, idx](Node& self) {
                             for (int i = 0; i < n; ++i)
                                 for (int ch = 0; ch < c; ++ch) {
                                     const auto chs = static_cast<std::size_t>(ch);
                                     const double istd = 1.0 / std::sqrt(var.data[chs] + eps);
                                     for (std::size_t e = 0; e < plane; ++e) {
                                         const double g = self.grad.data[idx(i, ch, e)];
                                         const double xh =
                                             (x->value.data[idx(i, ch, e)] - mean.data[chs]) * istd;
                                         if (x->requires_grad) {
                                             x->ensure_grad();
                                             x->grad.data[idx(i, ch, e)] +=
                                                 g * gamma->value.data[chs] * istd;
                                         }
                                         if (gamma->requires_grad) {
                                             gamma->ensure_grad();
                                             gamma->grad.data[chs] += g * xh;
                                         }
                                         if (beta->requires_grad) {
                                             beta->ensure_grad();
                                             beta->grad.data[chs] += g;
                                         }
                                     }
                                 }
                         });
    }

    require(n >= 2, "batch_norm: training mode needs a batch of at least 2");

    std::vector<double> mean(static_cast<std::size_t>(c), 0.0), var(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (std::size_t e = 0; e < plane; ++e)
                mean[static_cast<std::size_t>(ch)] += x->value.data[idx(i, ch, e)];
    for (auto& v : mean) v /= m;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (std::size_t e = 0; e < plane; ++e) {
                const double d = x->value.data[idx(i, ch, e)] - mean[static_cast<std::size_t>(ch)];
                var[static_cast<std::size_t>(ch)] += d * d;
            }
    for (auto& v : var) v /= m;

    if (!state.initialized) {
        state.running_mean = Tensor({c});
        state.running_var = Tensor({c}, 1.0);
        state.initialized = true;
    }
    for (int ch = 0; ch < c; ++ch) {
        const auto chs = static_cast<std::size_t>(ch);
        state.running_mean.data[chs] =
            (1.0 - state.momentum) * state.running_mean.data[chs] + state.momentum * mean[chs];
        state.running_var.data[chs] =
            (1.0 - state.momentum) * state.running_var.data[chs] + state.momentum * var[chs];
    }

    auto xhat = std::make_shared<Tensor>(x->value.shape);
    std::vector<double> inv_std(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch)
        inv_std[static_cast<std::size_t>(ch)] =
            1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + state.eps);

    Tensor out(x->value.shape);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const auto chs = static_cast<std::size_t>(ch);
            for (std::size_t e = 0; e < plane; ++e) {
                const double xh = (x->value.data[idx(i, ch, e)] - mean[chs]) * inv_std[chs];
                xhat->data[idx(i, ch, e)] = xh;
                out.data[idx(i, ch, e)] = gamma->value.data[chs] * xh + beta->value.data[chs];
            }
        }

    return make_node(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, n, c, plane, m, idx](Node& self) {
            for (int ch = 0; ch < c; ++ch) {
                const auto chs = static_cast<std::size_t>(ch);
                double sum_g = 0.0, sum_gx = 0.0;
                for (int i = 0; i < n; ++i)
                    for (std::size_t e = 0; e < plane; ++e) {
                        const double g = self.grad.data[idx(i, ch, e)];
                        sum_g += g;
                        sum_gx += g * xhat->data[idx(i, ch, e)];
                    }
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    gamma->grad.data[chs] += sum_gx;
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    beta->grad.data[chs] += sum_g;
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    const double k1 = sum_g / m, k2 = sum_gx / m;
                    const double a = gamma->value.data[chs] * inv_std[chs];
                    for (int i = 0; i < n; ++i)
                        for (std::size_t e = 0; e < plane; ++e) {
                            const double g = self.grad.data[idx(i, ch, e)];
                            x->grad.data[idx(i, ch, e)] +=
                                a * (g - k1 - xhat->data[idx(i, ch, e)] * k2);
                        }
                }
            }
        });
}

Value softmax_cross_entropy(const Value& logits, const std::vector<int>& labels) {
    require(logits->value.ndim() == 2, "softmax_cross_entropy: logits must be N x K");
    const int n = logits->value.dim(0), k = logits->value.dim(1);
    require(static_cast<std::size_t>(n) == labels.size(), "softmax_cross_entropy: label count mismatch");
    for (int lab : labels)
        require(lab >= 0 && lab < k, "softmax_cross_entropy: label " + std::to_string(lab) +
                                         " outside [0, " + std::to_string(k) + ")");

    auto probs = std::make_shared<Tensor>(logits->value.shape);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double mx = logits->value.at2(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits->value.at2(i, j));
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(logits->value.at2(i, j) - mx);
        const double logz = std::log(z) + mx;
        for (int j = 0; j < k; ++j) probs->at2(i, j) = std::exp(logits->value.at2(i, j) - logz);
        loss -= logits->value.at2(i, labels[static_cast<std::size_t>(i)]) - logz;
    }
    loss /= static_cast<double>(n);

    Tensor out({1});
    out.data[0] = loss;
    return make_node(std::move(out), {logits}, [logits, probs, labels, n, k](Node& self) {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const double g = self.grad.data[0] / static_cast<double>(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) {
                const double p = probs->at2(i, j);
                const double y = (j == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                logits->grad.at2(i, j) += g * (p - y);
            }
    });
}

// ---------------------------------------------------------------------------
// selective scan
// ---------------------------------------------------------------------------

namespace {

void check_scan_shapes(const Tensor& delta, const Tensor& A, const Tensor& B, const Tensor& C,
                       const Tensor& x, const Tensor& D) {
    require(delta.ndim() == 2 && x.ndim() == 2 && delta.shape == x.shape,
            "selective_scan: delta and x must both be T x C");
    require(A.ndim() == 2, "selective_scan: A must be C x S");
    const int T = delta.dim(0), Ch = delta.dim(1), S = A.dim(1);
    require(T >= 1, "selective_scan: empty sequence");
    require(A.dim(0) == Ch, "selective_scan: A rows must match channels");
    require(B.ndim() == 2 && B.dim(0) == T && B.dim(1) == S, "selective_scan: B must be T x S");
    require(C.ndim() == 2 && C.dim(0) == T && C.dim(1) == S, "selective_scan: C must be T x S");
    require(D.numel() == static_cast<std::size_t>(Ch), "selective_scan: D must have C entries");
    for (double v : delta.data) require(std::isfinite(v), "selective_scan: non-finite delta");
    for (double v : A.data) require(std::isfinite(v), "selective_scan: non-finite A");
}

// Hidden states for all t, laid out T x C x S. Sequential recurrence.
std::vector<double> scan_states_sequential(const Tensor& delta, const Tensor& A, const Tensor& B,
                                           const Tensor& x) {
    const int T = delta.dim(0), Ch = delta.dim(1), S = A.dim(1);
    std::vector<double> h(static_cast<std::size_t>(T) * Ch * S, 0.0);
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < Ch; ++c) {
            const double dt = delta.at2(t, c);
            const double xv = x.at2(t, c);
            const std::size_t base = (static_cast<std::size_t>(t) * Ch + c) * S;
            const std::size_t prev = (static_cast<std::size_t>(t - 1) * Ch + c) * S;
            for (int s = 0; s < S; ++s) {
                const double abar = std::exp(dt * A.at2(c, s));
                const double hprev = (t > 0) ? h[prev + static_cast<std::size_t>(s)] : 0.0;
                h[base + static_cast<std::size_t>(s)] = abar * hprev + dt * B.at2(t, s) * xv;
            }
        }
    return h;
}

// Same states via a Hillis-Steele inclusive scan over affine maps
// (a, b) with composition (a2, b2) o (a1, b1) = (a2*a1, a2*b1 + b2).
// Element t of the scanned array only ever combines elements <= t, so prefix
// outputs are unaffected by later inputs.
std::vector<double> scan_states_parallel(const Tensor& delta, const Tensor& A, const Tensor& B,
                                         const Tensor& x) {
    const int T = delta.dim(0), Ch = delta.dim(1), S = A.dim(1);
    std::vector<double> h(static_cast<std::size_t>(T) * Ch * S, 0.0);
    std::vector<double> a_cur(static_cast<std::size_t>(T)), b_cur(static_cast<std::size_t>(T));
    std::vector<double> a_nxt(static_cast<std::size_t>(T)), b_nxt(static_cast<std::size_t>(T));
    for (int c = 0; c < Ch; ++c)
        for (int s = 0; s < S; ++s) {
            for (int t = 0; t < T; ++t) {
                const double dt = delta.at2(t, c);
                a_cur[static_cast<std::size_t>(t)] = std::exp(dt * A.at2(c, s));
                b_cur[static_cast<std::size_t>(t)] = dt * B.at2(t, s) * x.at2(t, c);
            }
            for (int offset = 1; offset < T; offset <<= 1) {
                for (int t = 0; t < T; ++t) {
                    const auto ts = static_cast<std::size_t>(t);
                    if (t >= offset) {
                        const auto ps = static_cast<std::size_t>(t - offset);
                        a_nxt[ts] = a_cur[ts] * a_cur[ps];
                        b_nxt[ts] = a_cur[ts] * b_cur[ps] + b_cur[ts];
                    } else {
                        a_nxt[ts] = a_cur[ts];
                        b_nxt[ts] = b_cur[ts];
                    }
                }
                std::swap(a_cur, a_nxt);
                std::swap(b_cur, b_nxt);
            }
            // h_t = (composed prefix map)(h_0 = 0) = composed b term
            for (int t = 0; t < T; ++t)
                h[(static_cast<std::size_t>(t) * Ch + c) * S + static_cast<std::size_t>(s)] =
                    b_cur[static_cast<std::size_t>(t)];
        }
    return h;
}

Tensor scan_output(const std::vector<double>& h, const Tensor& C, const Tensor& x,
                   const Tensor& D, int T, int Ch, int S) {
    Tensor y({T, Ch});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < Ch; ++c) {
            const std::size_t base = (static_cast<std::size_t>(t) * Ch + c) * S;
            double acc = D.data[static_cast<std::size_t>(c)] * x.at2(t, c);
            for (int s = 0; s < S; ++s) acc += C.at2(t, s) * h[base + static_cast<std::size_t>(s)];
            y.at2(t, c) = acc;
        }
    return y;
}

}  // namespace

Tensor selective_scan_sequential(const Tensor& delta, const Tensor& A, const Tensor& B,
                                 const Tensor& C, const Tensor& x, const Tensor& D) {
    check_scan_shapes(delta, A, B, C, x, D);
    const int T = delta.dim(0), Ch = delta.dim(1), S = A.dim(1);
    const auto h = scan_states_sequential(delta, A, B, x);
    return scan_output(h, C, x, D, T, Ch, S);
}

Value selective_scan(const Value& delta, const Value& A, const Value& B, const Value& C,
                     const Value& x, const Value& D, bool parallel) {
    check_scan_shapes(delta->value, A->value, B->value, C->value, x->value, D->value);
    const int T = delta->value.dim(0), Ch = delta->value.dim(1), S = A->value.dim(1);

    auto h = std::make_shared<std::vector<double>>(
        parallel ? scan_states_parallel(delta->value, A->value, B->value, x->value)
                 : scan_states_sequential(delta->value, A->value, B->value, x->value));
    Tensor out = scan_output(*h, C->value, x->value, D->value, T, Ch, S);

    return make_node(
        std::move(out), {delta, A, B, C, x, D}, [delta, A, B, C, x, D, h, T, Ch, S](Node& self) {
            delta->ensure_grad();
            A->ensure_grad();
            B->ensure_grad();
            C->ensure_grad();
            x->ensure_grad();
            D->ensure_grad();

            // lam holds the hidden-state adjoint for time t+1 on entry to
            // each loop iteration: lam_t = g_t C_t + abar_{t+1} lam_{t+1}.
            std::vector<double> lam(static_cast<std::size_t>(Ch) * S, 0.0);
            for (int t = T - 1; t >= 0; --t) {
                for (int c = 0; c < Ch; ++c) {
                    const double g = self.grad.at2(t, c);
                    const double dt = delta->value.at2(t, c);
                    const double xv = x->value.at2(t, c);
                    const std::size_t hbase = (static_cast<std::size_t>(t) * Ch + c) * S;
                    const std::size_t pbase = (static_cast<std::size_t>(t - 1) * Ch + c) * S;
                    double ddelta = 0.0, dx = 0.0;
                    for (int s = 0; s < S; ++s) {
                        const auto cs = static_cast<std::size_t>(c) * S + static_cast<std::size_t>(s);
                        double l = g * C->value.at2(t, s);
                        if (t + 1 < T) {
                            const double abar_next =
                                std::exp(delta->value.at2(t + 1, c) * A->value.at2(c, s));
                            l += abar_next * lam[cs];
                        }
                        lam[cs] = l;

                        const double hcur = (*h)[hbase + static_cast<std::size_t>(s)];
                        C->grad.at2(t, s) += g * hcur;

                        const double hprev = (t > 0) ? (*h)[pbase + static_cast<std::size_t>(s)] : 0.0;
                        const double abar = std::exp(dt * A->value.at2(c, s));
                        ddelta += l * (hprev * abar * A->value.at2(c, s) + B->value.at2(t, s) * xv);
                        A->grad.at2(c, s) += l * hprev * abar * dt;
                        B->grad.at2(t, s) += l * dt * xv;
                        dx += l * dt * B->value.at2(t, s);
                    }
                    delta->grad.at2(t, c) += ddelta;
                    x->grad.at2(t, c) += dx + g * D->value.data[static_cast<std::size_t>(c)];
                    D->grad.data[static_cast<std::size_t>(c)] += g * xv;
                }
            }
        });
}

int argmax_row(const Tensor& t, int row) {
    require(t.ndim() == 2, "argmax_row expects a 2-d tensor");
    int best = 0;
    for (int j = 1; j < t.dim(1); ++j)
        if (t.at2(row, j) > t.at2(row, best)) best = j;
    return best;
}

}  // namespace terra::nn
