#include "structedit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "structedit/sampling.hpp"

namespace structedit {
namespace ad {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Var Tape::make(std::vector<double> value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {int(nodes_.size()) - 1, int(nodes_.back().value.size())};
}

bool Tape::any_grad(const std::vector<Var>& vs) const {
  for (Var v : vs)
    if (nodes_[v.id].needs_grad) return true;
  return false;
}

void Tape::check(Var v) const {
  require(v.id >= 0 && v.id < int(nodes_.size()), "invalid tape var");
  require(v.size == int(nodes_[v.id].value.size()), "stale tape var");
}

Var Tape::constant(std::vector<double> value) {
  return make(std::move(value), false, {});
}

Var Tape::leaf(std::vector<double> value) {
  return make(std::move(value), true, {});
}

const std::vector<double>& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

const std::vector<double>& Tape::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

void Tape::backward(Var out) {
  check(out);
  require(out.size == 1, "backward needs a scalar output");
  for (Node& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  nodes_[out.id].grad[0] = 1.0;
  for (int i = int(nodes_.size()) - 1; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  require(a.size == b.size, "size mismatch in add");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = v(a.id)[i] + v(b.id)[i];
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a, b}), [this, a, b, id] {
    for (int i = 0; i < a.size; ++i) {
      double gi = g(id)[i];
      g(a.id)[i] += gi;
      g(b.id)[i] += gi;
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  require(a.size == b.size, "size mismatch in sub");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = v(a.id)[i] - v(b.id)[i];
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a, b}), [this, a, b, id] {
    for (int i = 0; i < a.size; ++i) {
      double gi = g(id)[i];
      g(a.id)[i] += gi;
      g(b.id)[i] -= gi;
    }
  });
}

Var Tape::scale(Var a, double s) {
  check(a);
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = v(a.id)[i] * s;
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, s, id] {
    for (int i = 0; i < a.size; ++i) g(a.id)[i] += s * g(id)[i];
  });
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  require(a.size == b.size, "size mismatch in mul");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = v(a.id)[i] * v(b.id)[i];
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a, b}), [this, a, b, id] {
    for (int i = 0; i < a.size; ++i) {
      double gi = g(id)[i];
      g(a.id)[i] += gi * v(b.id)[i];
      g(b.id)[i] += gi * v(a.id)[i];
    }
  });
}

Var Tape::concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  std::vector<double> out;
  for (Var p : parts) {
    check(p);
    out.insert(out.end(), v(p.id).begin(), v(p.id).end());
  }
  int id = int(nodes_.size());
  std::vector<Var> ps = parts;
  return make(std::move(out), any_grad(parts), [this, ps, id] {
    int off = 0;
    for (Var p : ps) {
      for (int i = 0; i < p.size; ++i) g(p.id)[i] += g(id)[off + i];
      off += p.size;
    }
  });
}

Var Tape::slice(Var a, int start, int len) {
  check(a);
  require(start >= 0 && len >= 0 && start + len <= a.size, "slice out of range");
  std::vector<double> out(v(a.id).begin() + start, v(a.id).begin() + start + len);
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, start, len, id] {
    for (int i = 0; i < len; ++i) g(a.id)[start + i] += g(id)[i];
  });
}

Var Tape::affine(Var x, Var w, Var b) {
  check(x);
  check(w);
  check(b);
  int in = x.size, out_dim = b.size;
  require(w.size == in * out_dim, "weight size mismatch in affine");
  std::vector<double> out(out_dim);
  for (int o = 0; o < out_dim; ++o) {
    double acc = v(b.id)[o];
    const double* row = v(w.id).data() + size_t(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * v(x.id)[i];
    out[o] = acc;
  }
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({x, w, b}), [this, x, w, b, in, out_dim, id] {
    for (int o = 0; o < out_dim; ++o) {
      double go = g(id)[o];
      if (go == 0.0) continue;
      g(b.id)[o] += go;
      const double* row = v(w.id).data() + size_t(o) * in;
      double* wrow = g(w.id).data() + size_t(o) * in;
      for (int i = 0; i < in; ++i) {
        g(x.id)[i] += go * row[i];
        wrow[i] += go * v(x.id)[i];
      }
    }
  });
}

Var Tape::leaky_relu(Var a, double alpha) {
  check(a);
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) {
    double x = v(a.id)[i];
    out[i] = x >= 0.0 ? x : alpha * x;
  }
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, alpha, id] {
    for (int i = 0; i < a.size; ++i)
      g(a.id)[i] += (v(a.id)[i] >= 0.0 ? 1.0 : alpha) * g(id)[i];
  });
}

Var Tape::sigmoid(Var a) {
  check(a);
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = 1.0 / (1.0 + std::exp(-v(a.id)[i]));
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, id] {
    for (int i = 0; i < a.size; ++i) {
      double s = v(id)[i];
      g(a.id)[i] += s * (1.0 - s) * g(id)[i];
    }
  });
}

Var Tape::exp(Var a) {
  check(a);
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = std::exp(v(a.id)[i]);
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, id] {
    for (int i = 0; i < a.size; ++i) g(a.id)[i] += v(id)[i] * g(id)[i];
  });
}

Var Tape::max_pool(const std::vector<Var>& elems) {
  require(!elems.empty(), "max_pool of nothing");
  int n = elems[0].size;
  for (Var e : elems) {
    check(e);
    require(e.size == n, "size mismatch in max_pool");
  }
  std::vector<double> out(n);
  std::vector<int> argmax(n, 0);
  for (int i = 0; i < n; ++i) {
    double best = v(elems[0].id)[i];
    for (size_t e = 1; e < elems.size(); ++e) {
      double x = v(elems[e].id)[i];
      if (x > best) {
        best = x;
        argmax[i] = int(e);
      }
    }
    out[i] = best;
  }
  int id = int(nodes_.size());
  std::vector<Var> es = elems;
  return make(std::move(out), any_grad(elems), [this, es, argmax, n, id] {
    for (int i = 0; i < n; ++i) g(es[argmax[i]].id)[i] += g(id)[i];
  });
}

Var Tape::group_norm(Var x, int groups, Var gamma, Var beta, double eps) {
  check(x);
  check(gamma);
  check(beta);
  require(groups > 0 && x.size % groups == 0, "group size mismatch");
  require(gamma.size == x.size && beta.size == x.size, "scale size mismatch");
  int gs = x.size / groups;
  std::vector<double> xhat(x.size), inv(groups);
  for (int gi = 0; gi < groups; ++gi) {
    const double* xs = v(x.id).data() + size_t(gi) * gs;
    double mean = 0.0;
    for (int i = 0; i < gs; ++i) mean += xs[i];
    mean /= gs;
    double var = 0.0;
    for (int i = 0; i < gs; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= gs;
    inv[gi] = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < gs; ++i) xhat[size_t(gi) * gs + i] = (xs[i] - mean) * inv[gi];
  }
  std::vector<double> out(x.size);
  for (int i = 0; i < x.size; ++i)
    out[i] = v(gamma.id)[i] * xhat[i] + v(beta.id)[i];
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({x, gamma, beta}),
              [this, x, gamma, beta, groups, gs, xhat, inv, id] {
                for (int i = 0; i < x.size; ++i) {
                  g(gamma.id)[i] += g(id)[i] * xhat[i];
                  g(beta.id)[i] += g(id)[i];
                }
                for (int gi = 0; gi < groups; ++gi) {
                  double mean_dh = 0.0, mean_dhx = 0.0;
                  for (int i = 0; i < gs; ++i) {
                    size_t k = size_t(gi) * gs + i;
                    double dh = g(id)[k] * v(gamma.id)[k];
                    mean_dh += dh;
                    mean_dhx += dh * xhat[k];
                  }
                  mean_dh /= gs;
                  mean_dhx /= gs;
                  for (int i = 0; i < gs; ++i) {
                    size_t k = size_t(gi) * gs + i;
                    double dh = g(id)[k] * v(gamma.id)[k];
                    g(x.id)[k] += inv[gi] * (dh - mean_dh - xhat[k] * mean_dhx);
                  }
                }
              });
}

Var Tape::normalize(Var a) {
  check(a);
  double n2 = 0.0;
  for (double x : v(a.id)) n2 += x * x;
  double n = std::sqrt(n2);
  require(n > 1e-12, "normalize of a near-zero vector");
  std::vector<double> out(a.size);
  for (int i = 0; i < a.size; ++i) out[i] = v(a.id)[i] / n;
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a}), [this, a, n, id] {
    double dot = 0.0;
    for (int i = 0; i < a.size; ++i) dot += v(id)[i] * g(id)[i];
    for (int i = 0; i < a.size; ++i)
      g(a.id)[i] += (g(id)[i] - v(id)[i] * dot) / n;
  });
}

Var Tape::quat_multiply(Var a, Var b) {
  check(a);
  check(b);
  require(a.size == 4 && b.size == 4, "quat_multiply needs 4-vectors");
  const auto& p = v(a.id);
  const auto& q = v(b.id);
  std::vector<double> out = {
      p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
      p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
      p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
      p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]};
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a, b}), [this, a, b, id] {
    const auto& p = v(a.id);
    const auto& q = v(b.id);
    const auto& go = g(id);
    Vec3 gv{go[1], go[2], go[3]};
    Vec3 pv{p[1], p[2], p[3]}, qv{q[1], q[2], q[3]};
    g(a.id)[0] += go[0] * q[0] + gv.dot(qv);
    Vec3 da = qv * -go[0] + gv * q[0] + qv.cross(gv);
    g(a.id)[1] += da.x;
    g(a.id)[2] += da.y;
    g(a.id)[3] += da.z;
    g(b.id)[0] += go[0] * p[0] + gv.dot(pv);
    Vec3 db = pv * -go[0] + gv * p[0] + gv.cross(pv);
    g(b.id)[1] += db.x;
    g(b.id)[2] += db.y;
    g(b.id)[3] += db.z;
  });
}

Var Tape::box_points(Var center, Var quat, Var extents, int grid_m) {
  check(center);
  check(quat);
  check(extents);
  require(center.size == 3 && quat.size == 4 && extents.size == 3,
          "box_points needs center 3, quat 4, extents 3");
  const std::vector<Vec3>& grid = unit_box_grid(grid_m);
  int n = int(grid.size());
  std::vector<double> out(size_t(n) * 3);
  Vec3 c{v(center.id)[0], v(center.id)[1], v(center.id)[2]};
  Quat q{v(quat.id)[0], v(quat.id)[1], v(quat.id)[2], v(quat.id)[3]};
  Vec3 r{v(extents.id)[0], v(extents.id)[1], v(extents.id)[2]};
  for (int k = 0; k < n; ++k) {
    Vec3 p = c + q.rotate(grid[k].cwise(r));
    out[size_t(k) * 3 + 0] = p.x;
    out[size_t(k) * 3 + 1] = p.y;
    out[size_t(k) * 3 + 2] = p.z;
  }
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({center, quat, extents}),
              [this, center, quat, extents, &grid, n, id] {
                double w = v(quat.id)[0];
                Vec3 xq{v(quat.id)[1], v(quat.id)[2], v(quat.id)[3]};
                Quat q{w, xq.x, xq.y, xq.z};
                Quat qc = q.conjugate();
                Vec3 r{v(extents.id)[0], v(extents.id)[1], v(extents.id)[2]};
                for (int k = 0; k < n; ++k) {
                  Vec3 gb{g(id)[size_t(k) * 3 + 0], g(id)[size_t(k) * 3 + 1],
                          g(id)[size_t(k) * 3 + 2]};
                  g(center.id)[0] += gb.x;
                  g(center.id)[1] += gb.y;
                  g(center.id)[2] += gb.z;
                  Vec3 s = grid[k].cwise(r);
                  Vec3 xs = xq.cross(s);
                  // d/dw of s + 2w(x cross s) + 2x cross (x cross s)
                  g(quat.id)[0] += 2.0 * xs.dot(gb);
                  Vec3 dx = s.cross(gb) * (2.0 * w) + xs.cross(gb) * 2.0 +
                            s.cross(gb.cross(xq)) * 2.0;
                  g(quat.id)[1] += dx.x;
                  g(quat.id)[2] += dx.y;
                  g(quat.id)[3] += dx.z;
                  // pullback through the rotation, then through the cwise scale
                  Vec3 ds = qc.rotate(gb);
                  g(extents.id)[0] += ds.x * grid[k].x;
                  g(extents.id)[1] += ds.y * grid[k].y;
                  g(extents.id)[2] += ds.z * grid[k].z;
                }
              });
}

Var Tape::chamfer(Var a, Var b) {
  check(a);
  check(b);
  require(a.size % 3 == 0 && b.size % 3 == 0 && a.size > 0 && b.size > 0,
          "chamfer needs non-empty xyz triples");
  int n = a.size / 3, m = b.size / 3;
  auto point = [this](Var p, int i) {
    return Vec3{v(p.id)[size_t(i) * 3], v(p.id)[size_t(i) * 3 + 1],
                v(p.id)[size_t(i) * 3 + 2]};
  };
  std::vector<int> nn_ab(n), nn_ba(m);
  double sab = 0.0, sba = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec3 p = point(a, i);
    double best = 1e300;
    for (int j = 0; j < m; ++j) {
      double d = squared_distance(p, point(b, j));
      if (d < best) {
        best = d;
        nn_ab[i] = j;
      }
    }
    sab += best;
  }
  for (int j = 0; j < m; ++j) {
    Vec3 p = point(b, j);
    double best = 1e300;
    for (int i = 0; i < n; ++i) {
      double d = squared_distance(p, point(a, i));
      if (d < best) {
        best = d;
        nn_ba[j] = i;
      }
    }
    sba += best;
  }
  std::vector<double> out = {sab / n + sba / m};
  int id = int(nodes_.size());
  return make(std::move(out), any_grad({a, b}),
              [this, a, b, n, m, nn_ab, nn_ba, point, id] {
                double go = g(id)[0];
                auto pull = [&](Var pa, int i, Var pb, int j, double scale) {
                  Vec3 d = point(pa, i) - point(pb, j);
                  double s = 2.0 * scale * go;
                  g(pa.id)[size_t(i) * 3 + 0] += s * d.x;
                  g(pa.id)[size_t(i) * 3 + 1] += s * d.y;
                  g(pa.id)[size_t(i) * 3 + 2] += s * d.z;
                  g(pb.id)[size_t(j) * 3 + 0] -= s * d.x;
                  g(pb.id)[size_t(j) * 3 + 1] -= s * d.y;
                  g(pb.id)[size_t(j) * 3 + 2] -= s * d.z;
                };
                for (int i = 0; i < n; ++i) pull(a, i, b, nn_ab[i], 1.0 / n);
                for (int j = 0; j < m; ++j) pull(b, j, a, nn_ba[j], 1.0 / m);
              });
}

Var Tape::sum(Var a) {
  check(a);
  double s = 0.0;
  for (double x : v(a.id)) s += x;
  int id = int(nodes_.size());
  return make({s}, any_grad({a}), [this, a, id] {
    for (int i = 0; i < a.size; ++i) g(a.id)[i] += g(id)[0];
  });
}

Var Tape::squared_norm(Var a) {
  check(a);
  double s = 0.0;
  for (double x : v(a.id)) s += x * x;
  int id = int(nodes_.size());
  return make({s}, any_grad({a}), [this, a, id] {
    for (int i = 0; i < a.size; ++i) g(a.id)[i] += 2.0 * v(a.id)[i] * g(id)[0];
  });
}

Var Tape::softmax_cross_entropy(Var logits, int target) {
  check(logits);
  require(target >= 0 && target < logits.size, "target out of range");
  double mx = *std::max_element(v(logits.id).begin(), v(logits.id).end());
  std::vector<double> p(logits.size);
  double z = 0.0;
  for (int i = 0; i < logits.size; ++i) {
    p[i] = std::exp(v(logits.id)[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  double loss = -std::log(std::max(p[target], 1e-300));
  int id = int(nodes_.size());
  return make({loss}, any_grad({logits}), [this, logits, target, p, id] {
    for (int i = 0; i < logits.size; ++i)
      g(logits.id)[i] += (p[i] - (i == target ? 1.0 : 0.0)) * g(id)[0];
  });
}

Var Tape::bce_with_logits(Var logits, const std::vector<double>& targets) {
  check(logits);
  require(int(targets.size()) == logits.size, "target size mismatch");
  int k = logits.size;
  double loss = 0.0;
  for (int i = 0; i < k; ++i) {
    double z = v(logits.id)[i], t = targets[i];
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= k;
  int id = int(nodes_.size());
  return make({loss}, any_grad({logits}), [this, logits, targets, k, id] {
    for (int i = 0; i < k; ++i) {
      double s = 1.0 / (1.0 + std::exp(-v(logits.id)[i]));
      g(logits.id)[i] += (s - targets[i]) / k * g(id)[0];
    }
  });
}

Var Tape::gaussian_kl(Var mean, Var logvar) {
  check(mean);
  check(logvar);
  require(mean.size == logvar.size, "size mismatch in gaussian_kl");
  double kl = 0.0;
  for (int i = 0; i < mean.size; ++i) {
    double mu = v(mean.id)[i], lv = v(logvar.id)[i];
    kl += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
  }
  int id = int(nodes_.size());
  return make({kl}, any_grad({mean, logvar}), [this, mean, logvar, id] {
    for (int i = 0; i < mean.size; ++i) {
      g(mean.id)[i] += v(mean.id)[i] * g(id)[0];
      g(logvar.id)[i] += 0.5 * (std::exp(v(logvar.id)[i]) - 1.0) * g(id)[0];
    }
  });
}

}  // namespace ad
}  // namespace structedit
