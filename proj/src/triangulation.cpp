#include "cellflow/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <string>
#include <tuple>
#include <unordered_map>

#include "cellflow/errors.hpp"

namespace cellflow {

using Vec2 = Eigen::Vector2d;

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  const long double abx = static_cast<long double>(b.x()) - a.x();
  const long double aby = static_cast<long double>(b.y()) - a.y();
  const long double acx = static_cast<long double>(c.x()) - a.x();
  const long double acy = static_cast<long double>(c.y()) - a.y();
  return static_cast<double>(abx * acy - aby * acx);
}

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  auto angle = [](double opp, double s1, double s2) {
    const double v = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
    return std::acos(std::clamp(v, -1.0, 1.0));
  };
  const double m = std::min({angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)});
  return m * 180.0 / std::numbers::pi;
}

namespace {

// > 0 when d lies strictly inside the circumcircle of the ccw triangle abc
long double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const long double adx = static_cast<long double>(a.x()) - d.x();
  const long double ady = static_cast<long double>(a.y()) - d.y();
  const long double bdx = static_cast<long double>(b.x()) - d.x();
  const long double bdy = static_cast<long double>(b.y()) - d.y();
  const long double cdx = static_cast<long double>(c.x()) - d.x();
  const long double cdy = static_cast<long double>(c.y()) - d.y();
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  return a + Vec2(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / d;
}

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

class Mesher {
 public:
  Mesher(const Pslg& pslg, const RefineOptions& opt) : opt_(opt) {
    if (pslg.points.empty()) throw MeshingError("empty input");
    Vec2 lo = pslg.points[0], hi = pslg.points[0];
    for (const auto& p : pslg.points) {
      if (!p.allFinite()) throw MeshingError("non-finite input point");
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec2 c = 0.5 * (lo + hi);
    const double d = std::max((hi - lo).maxCoeff(), 1e-12);
    scale_ = d;
    pts_.push_back(c + Vec2(-40.0 * d, -30.0 * d));
    pts_.push_back(c + Vec2(40.0 * d, -30.0 * d));
    pts_.push_back(c + Vec2(0.0, 40.0 * d));
    add_tri(0, 1, 2);

    input_index_.reserve(pslg.points.size());
    for (const auto& p : pslg.points) input_index_.push_back(insert(p));
    for (const auto& s : pslg.segments) {
      const int a = input_index_.at(s[0]), b = input_index_.at(s[1]);
      if (a == b) throw MeshingError("degenerate segment");
      segs_.push_back({a, b});
    }
  }

  Triangulation run() {
    fix_segments();
    refine();
    fix_segments();
    for (const auto& s : segs_) {
      if (!has_edge(s[0], s[1])) {
        throw MeshingError("segment (" + point_str(s[0]) + ") - (" + point_str(s[1]) +
                           ") could not be recovered");
      }
    }
    return extract();
  }

 private:
  struct Tri {
    std::array<int, 3> v;
    bool alive;
  };

  const RefineOptions& opt_;
  double scale_ = 1.0;
  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<std::array<int, 2>> segs_;
  std::vector<int> input_index_;
  int last_ = 0;
  std::vector<int> created_;

  std::string point_str(int i) const {
    return std::to_string(pts_[i].x()) + ", " + std::to_string(pts_[i].y());
  }

  bool is_super(int v) const { return v < 3; }

  int add_tri(int a, int b, int c) {
    int t;
    if (!free_.empty()) {
      t = free_.back();
      free_.pop_back();
      tris_[t] = {{a, b, c}, true};
    } else {
      t = static_cast<int>(tris_.size());
      tris_.push_back({{a, b, c}, true});
    }
    edges_[edge_key(a, b)] = t;
    edges_[edge_key(b, c)] = t;
    edges_[edge_key(c, a)] = t;
    created_.push_back(t);
    return t;
  }

  void kill_tri(int t) {
    auto& tr = tris_[t];
    for (int i = 0; i < 3; ++i) edges_.erase(edge_key(tr.v[i], tr.v[(i + 1) % 3]));
    tr.alive = false;
    free_.push_back(t);
  }

  int across(int a, int b) const {
    const auto it = edges_.find(edge_key(b, a));
    return it == edges_.end() ? -1 : it->second;
  }

  bool has_edge(int a, int b) const {
    return edges_.count(edge_key(a, b)) != 0 || edges_.count(edge_key(b, a)) != 0;
  }

  int locate(const Vec2& p) {
    int t = last_;
    if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
      t = -1;
      for (int i = static_cast<int>(tris_.size()); i-- > 0;) {
        if (tris_[i].alive) {
          t = i;
          break;
        }
      }
    }
    const std::size_t limit = 4 * tris_.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
      const auto& v = tris_[t].v;
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = static_cast<int>((k + step) % 3);
        const int a = v[i], b = v[(i + 1) % 3];
        if (orient2d(pts_[a], pts_[b], p) < 0.0) {
          const int n = across(a, b);
          if (n < 0) throw MeshingError("point outside the bounding triangle");
          t = n;
          moved = true;
          break;
        }
      }
      if (!moved) return t;
    }
    for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
      if (!tris_[i].alive) continue;
      const auto& v = tris_[i].v;
      if (orient2d(pts_[v[0]], pts_[v[1]], p) >= 0 && orient2d(pts_[v[1]], pts_[v[2]], p) >= 0 &&
          orient2d(pts_[v[2]], pts_[v[0]], p) >= 0) {
        return i;
      }
    }
    throw MeshingError("point location failed at (" + std::to_string(p.x()) + ", " +
                       std::to_string(p.y()) + ")");
  }

  int insert(const Vec2& p) {
    created_.clear();
    const int t0 = locate(p);
    for (int v : tris_[t0].v) {
      if ((pts_[v] - p).norm() <= 1e-13 * scale_) return v;
    }
    const int pi = static_cast<int>(pts_.size());
    pts_.push_back(p);
    if (pts_.size() > opt_.max_vertices + 3) {
      throw MeshingError("vertex limit exceeded near (" + std::to_string(p.x()) + ", " +
                         std::to_string(p.y()) + ")");
    }

    // Bowyer-Watson cavity
    std::vector<int> cavity{t0};
    std::unordered_map<int, char> in;
    in[t0] = 1;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const auto v = tris_[cavity[k]].v;
      for (int i = 0; i < 3; ++i) {
        const int n = across(v[i], v[(i + 1) % 3]);
        if (n < 0 || in.count(n)) continue;
        const auto& w = tris_[n].v;
        if (incircle(pts_[w[0]], pts_[w[1]], pts_[w[2]], p) > 0) {
          in[n] = 1;
          cavity.push_back(n);
        } else {
          in[n] = 0;
        }
      }
    }

    // shrink until every boundary edge sees p on its left
    std::vector<std::array<int, 2>> boundary;
    for (;;) {
      boundary.clear();
      std::vector<int> drop;
      for (int t : cavity) {
        const auto& v = tris_[t].v;
        for (int i = 0; i < 3; ++i) {
          const int a = v[i], b = v[(i + 1) % 3];
          const int n = across(a, b);
          if (n >= 0) {
            const auto it = in.find(n);
            if (it != in.end() && it->second) continue;
          }
          boundary.push_back({a, b});
          if (orient2d(pts_[a], pts_[b], p) <= 0.0 && t != t0) drop.push_back(t);
        }
      }
      if (drop.empty()) break;
      for (int t : drop) in[t] = 0;
      // keep the part connected to t0
      std::vector<int> kept{t0};
      std::unordered_map<int, char> seen{{t0, 1}};
      for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto v = tris_[kept[k]].v;
        for (int i = 0; i < 3; ++i) {
          const int n = across(v[i], v[(i + 1) % 3]);
          if (n < 0 || seen.count(n)) continue;
          const auto it = in.find(n);
          if (it != in.end() && it->second) {
            seen[n] = 1;
            kept.push_back(n);
          }
        }
      }
      for (int t : cavity) {
        if (!seen.count(t)) in[t] = 0;
      }
      cavity = kept;
    }

    for (int t : cavity) kill_tri(t);
    for (const auto& e : boundary) last_ = add_tri(e[0], e[1], pi);
    return pi;
  }

  bool in_diametral(const std::array<int, 2>& s, const Vec2& p) const {
    const Vec2& a = pts_[s[0]];
    const Vec2& b = pts_[s[1]];
    return (a - p).dot(b - p) < 0.0;
  }

  // Missing segments always need a split; present ones only while they are
  // long enough, which stops the split cascade between segments that meet
  // at a small angle.
  bool needs_split(const std::array<int, 2>& s) const {
    if (!has_edge(s[0], s[1])) return true;
    if ((pts_[s[0]] - pts_[s[1]]).norm() < 2.0 * opt_.min_edge) return false;
    for (int dir = 0; dir < 2; ++dir) {
      const int a = dir ? s[1] : s[0], b = dir ? s[0] : s[1];
      const auto it = edges_.find(edge_key(a, b));
      if (it == edges_.end()) continue;
      for (int v : tris_[it->second].v) {
        if (v != a && v != b && !is_super(v) && in_diametral(s, pts_[v])) return true;
      }
    }
    return false;
  }

  void split_segment(std::size_t k) {
    const auto s = segs_[k];
    const Vec2 m = 0.5 * (pts_[s[0]] + pts_[s[1]]);
    const int mi = insert(m);
    if (mi == s[0] || mi == s[1]) throw MeshingError("segment too short to split");
    segs_[k] = {s[0], mi};
    segs_.push_back({mi, s[1]});
  }

  void fix_segments() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t k = 0; k < segs_.size(); ++k) {
        while (needs_split(segs_[k])) {
          split_segment(k);
          changed = true;
        }
      }
    }
  }

  struct Candidate {
    double badness;
    std::array<int, 3> v;
    int tri;
    bool operator<(const Candidate& o) const {
      // max-heap on badness; ties go to the lowest vertex indices
      if (badness != o.badness) return badness < o.badness;
      return v > o.v;
    }
  };

  bool candidate(int t, Candidate& out) const {
    const auto& tr = tris_[t];
    if (!tr.alive) return false;
    for (int v : tr.v) {
      if (is_super(v)) return false;
    }
    const Vec2& a = pts_[tr.v[0]];
    const Vec2& b = pts_[tr.v[1]];
    const Vec2& c = pts_[tr.v[2]];
    if (!opt_.inside((a + b + c) / 3.0)) return false;
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double lmax = std::max({la, lb, lc});
    const double lmin = std::min({la, lb, lc});
    double bad = 0.0;
    if (lmax > opt_.max_edge) bad = std::max(bad, lmax / opt_.max_edge);
    if (lmin >= opt_.min_edge) {
      const double ang = min_angle_deg(a, b, c);
      if (ang < opt_.min_angle_deg) bad = std::max(bad, opt_.min_angle_deg / std::max(ang, 1e-6));
    }
    if (bad <= 0.0) return false;
    std::array<int, 3> key = tr.v;
    std::sort(key.begin(), key.end());
    out = {bad, key, t};
    return true;
  }

  void refine() {
    std::priority_queue<Candidate> queue;
    Candidate cand;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      if (candidate(t, cand)) queue.push(cand);
    }
    while (!queue.empty()) {
      const Candidate top = queue.top();
      queue.pop();
      Candidate now;
      if (!candidate(top.tri, now) || now.v != top.v) continue;

      const auto& v = tris_[top.tri].v;
      const Vec2 c = circumcenter(pts_[v[0]], pts_[v[1]], pts_[v[2]]);
      std::vector<std::size_t> hit;
      for (std::size_t k = 0; k < segs_.size(); ++k) {
        if (in_diametral(segs_[k], c)) hit.push_back(k);
      }
      std::vector<int> fresh;
      if (!hit.empty()) {
        bool split_any = false;
        for (std::size_t k : hit) {
          const double len = (pts_[segs_[k][0]] - pts_[segs_[k][1]]).norm();
          if (len < 2.0 * opt_.min_edge) continue;
          split_segment(k);
          fresh.insert(fresh.end(), created_.begin(), created_.end());
          split_any = true;
        }
        if (!split_any) continue;
        fix_segments_collect(fresh);
      } else {
        if (!c.allFinite() || !opt_.inside(c)) continue;
        insert(c);
        fresh = created_;
        fix_segments_collect(fresh);
      }
      if (fresh.empty()) continue;
      for (int t : fresh) {
        if (candidate(t, cand)) queue.push(cand);
      }
      if (candidate(top.tri, cand)) queue.push(cand);
    }
  }

  void fix_segments_collect(std::vector<int>& fresh) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t k = 0; k < segs_.size(); ++k) {
        while (needs_split(segs_[k])) {
          split_segment(k);
          fresh.insert(fresh.end(), created_.begin(), created_.end());
          changed = true;
        }
      }
    }
  }

  Triangulation extract() const {
    Triangulation out;
    std::vector<int> remap(pts_.size(), -1);
    for (const auto& tr : tris_) {
      if (!tr.alive) continue;
      if (is_super(tr.v[0]) || is_super(tr.v[1]) || is_super(tr.v[2])) continue;
      const Vec2 cen = (pts_[tr.v[0]] + pts_[tr.v[1]] + pts_[tr.v[2]]) / 3.0;
      if (!opt_.inside(cen)) continue;
      std::array<int, 3> t;
      for (int i = 0; i < 3; ++i) {
        int& r = remap[tr.v[i]];
        if (r < 0) r = -2;  // mark used, numbered below
        t[i] = tr.v[i];
      }
      out.triangles.push_back(t);
    }
    // number vertices in insertion order so the output does not depend on
    // the triangle storage order
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (remap[i] == -2) {
        remap[i] = static_cast<int>(out.points.size());
        out.points.push_back(pts_[i]);
      }
    }
    for (auto& t : out.triangles) {
      for (int& v : t) v = remap[v];
      // rotate so the smallest index comes first
      const auto it = std::min_element(t.begin(), t.end());
      std::rotate(t.begin(), it, t.end());
    }
    std::sort(out.triangles.begin(), out.triangles.end());
    return out;
  }
};

}  // namespace

Triangulation triangulate(const Pslg& pslg, const RefineOptions& options) {
  RefineOptions opt = options;
  if (!opt.inside) opt.inside = [](const Vec2&) { return true; };
  if (!(opt.max_edge > 0.0)) throw MeshingError("max edge length must be positive");
  if (!(opt.min_edge > 0.0)) {
    double extent = 0.0;
    for (const auto& p : pslg.points) extent = std::max(extent, p.cwiseAbs().maxCoeff());
    opt.min_edge = 1e-4 * std::max(extent, 1.0);
  }
  if (opt.min_angle_deg > 33.0) throw MeshingError("minimum angle above 33 degrees may not terminate");
  Mesher m(pslg, opt);
  return m.run();
}

}  // namespace cellflow
