#include "pcdiff/marching_cubes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <unordered_map>

namespace pcdiff {

namespace {

// Corner and edge numbering (Lorensen/Bourke convention).
constexpr int kCornerOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                    {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                    {0, 4}, {1, 5}, {2, 6}, {3, 7}};
// Faces as cyclic corner quadruples; boundary edge ids follow the cycle.
constexpr int kFaceCorner[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                   {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
constexpr int kFaceEdge[6][4] = {{0, 1, 2, 3},  {4, 5, 6, 7},  {0, 9, 4, 8},
                                 {1, 10, 5, 9}, {2, 11, 6, 10}, {3, 8, 7, 11}};

using Cycles = std::vector<std::vector<int>>;

// Connects the crossed boundary edges of every face, then stitches the
// per-face links into closed loops. `values` enables the asymptotic
// decider on ambiguous faces; null keeps the fixed table convention
// (isolate the inside corners).
Cycles build_cycles(const bool inside[8], const double* values, double iso,
                    bool* saw_ambiguous = nullptr) {
  bool crossed[12];
  for (int e = 0; e < 12; ++e)
    crossed[e] = inside[kEdgeCorner[e][0]] != inside[kEdgeCorner[e][1]];

  int adj[12][2];
  int adj_n[12] = {0};
  auto link = [&](int a, int b) {
    adj[a][adj_n[a]++] = b;
    adj[b][adj_n[b]++] = a;
  };

  for (int f = 0; f < 6; ++f) {
    int ce[4];
    int nc = 0;
    for (int k = 0; k < 4; ++k)
      if (crossed[kFaceEdge[f][k]]) ce[nc++] = k;
    if (nc == 0) continue;
    if (nc == 2) {
      link(kFaceEdge[f][ce[0]], kFaceEdge[f][ce[1]]);
      continue;
    }
    // All four edges crossed: the inside corners sit on a diagonal.
    if (saw_ambiguous) *saw_ambiguous = true;
    bool connect_inside = false;
    if (values) {
      const double f0 = values[kFaceCorner[f][0]];
      const double f1 = values[kFaceCorner[f][1]];
      const double f2 = values[kFaceCorner[f][2]];
      const double f3 = values[kFaceCorner[f][3]];
      const double denom = f0 + f2 - f1 - f3;
      if (std::abs(denom) > 1e-300) {
        const double saddle = (f0 * f2 - f1 * f3) / denom;
        connect_inside = saddle < iso;
      }
    }
    const bool corner0_inside = inside[kFaceCorner[f][0]];
    // Edges cyclically: e0 = c0c1, e1 = c1c2, e2 = c2c3, e3 = c3c0.
    // Arcs around {c1, c3} pair (e0,e1) and (e2,e3); arcs around
    // {c0, c2} pair (e3,e0) and (e1,e2).
    const bool pair_around_odd = corner0_inside != connect_inside;
    if (pair_around_odd) {
      link(kFaceEdge[f][0], kFaceEdge[f][1]);
      link(kFaceEdge[f][2], kFaceEdge[f][3]);
    } else {
      link(kFaceEdge[f][3], kFaceEdge[f][0]);
      link(kFaceEdge[f][1], kFaceEdge[f][2]);
    }
  }

  Cycles cycles;
  bool used[12] = {false};
  for (int e = 0; e < 12; ++e) {
    if (!crossed[e] || used[e]) continue;
    std::vector<int> cyc;
    int prev = -1, cur = e;
    do {
      cyc.push_back(cur);
      used[cur] = true;
      const int next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
      prev = cur;
      cur = next;
    } while (cur != e);
    if (cyc.size() >= 3) cycles.push_back(std::move(cyc));
  }
  return cycles;
}

struct CaseEntry {
  Cycles cycles;
  bool ambiguous = false;
};

const std::array<CaseEntry, 256>& case_table() {
  static std::array<CaseEntry, 256> table;
  static std::once_flag once;
  std::call_once(once, [] {
    for (int c = 0; c < 256; ++c) {
      bool inside[8];
      for (int i = 0; i < 8; ++i) inside[i] = (c >> i) & 1;
      bool amb = false;
      table[size_t(c)].cycles = build_cycles(inside, nullptr, 0.0, &amb);
      table[size_t(c)].ambiguous = amb;
    }
  });
  return table;
}

}  // namespace

TriangleMesh marching_cubes(const ScalarField& field, double threshold) {
  PCD_CHECK(threshold > 0.0, "marching_cubes: threshold must be positive");
  PCD_CHECK(field.gx >= 2 && field.gy >= 2 && field.gz >= 2,
            "marching_cubes: grid must be at least 2 points per axis");
  const auto& table = case_table();
  TriangleMesh mesh;

  // Values exactly at the threshold are nudged outside so intersections
  // never land exactly on grid vertices (keeps welding well defined).
  const double nudge = 1e-12 * std::max(1.0, std::abs(threshold));
  auto value_at = [&](int64_t ix, int64_t iy, int64_t iz) {
    const double v = field.at(ix, iy, iz);
    return v == threshold ? threshold + nudge : v;
  };

  // Global edge key -> welded vertex id. Key: base grid vertex and axis.
  std::unordered_map<uint64_t, int64_t> edge_vertex;
  auto weld = [&](int64_t cx, int64_t cy, int64_t cz, int e,
                  const double vals[8]) -> int64_t {
    const int a = kEdgeCorner[e][0], b = kEdgeCorner[e][1];
    const int base = (kCornerOffset[a][0] + kCornerOffset[a][1] +
                      kCornerOffset[a][2]) <
                             (kCornerOffset[b][0] + kCornerOffset[b][1] +
                              kCornerOffset[b][2])
                         ? a
                         : b;
    const int other = base == a ? b : a;
    int axis = 0;
    for (int c = 0; c < 3; ++c)
      if (kCornerOffset[base][c] != kCornerOffset[other][c]) axis = c;
    const int64_t vx = cx + kCornerOffset[base][0];
    const int64_t vy = cy + kCornerOffset[base][1];
    const int64_t vz = cz + kCornerOffset[base][2];
    const uint64_t key =
        (uint64_t((vz * field.gy + vy) * field.gx + vx)) * 3 + uint64_t(axis);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    const double va = vals[base], vb = vals[other];
    const double t = (threshold - va) / (vb - va);
    auto pa = field.position(cx + kCornerOffset[base][0],
                             cy + kCornerOffset[base][1],
                             cz + kCornerOffset[base][2]);
    auto pb = field.position(cx + kCornerOffset[other][0],
                             cy + kCornerOffset[other][1],
                             cz + kCornerOffset[other][2]);
    const std::array<double, 3> pos = {pa[0] + t * (pb[0] - pa[0]),
                                       pa[1] + t * (pb[1] - pa[1]),
                                       pa[2] + t * (pb[2] - pa[2])};
    const int64_t id = int64_t(mesh.vertices.size());
    mesh.vertices.push_back(pos);
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int64_t cz = 0; cz + 1 < field.gz; ++cz)
    for (int64_t cy = 0; cy + 1 < field.gy; ++cy)
      for (int64_t cx = 0; cx + 1 < field.gx; ++cx) {
        double vals[8];
        bool inside[8];
        int case_idx = 0;
        for (int i = 0; i < 8; ++i) {
          vals[i] = value_at(cx + kCornerOffset[i][0], cy + kCornerOffset[i][1],
                             cz + kCornerOffset[i][2]);
          inside[i] = vals[i] < threshold;
          case_idx |= inside[i] ? (1 << i) : 0;
        }
        if (case_idx == 0 || case_idx == 255) continue;
        const CaseEntry& entry = table[size_t(case_idx)];
        const Cycles runtime_cycles =
            entry.ambiguous ? build_cycles(inside, vals, threshold) : Cycles{};
        const Cycles& cycles = entry.ambiguous ? runtime_cycles : entry.cycles;

        for (const auto& cyc : cycles) {
          std::vector<int64_t> ids(cyc.size());
          for (size_t i = 0; i < cyc.size(); ++i)
            ids[i] = weld(cx, cy, cz, cyc[size_t(i)], vals);

          // Orient so the normal points toward the below-threshold side:
          // positive dot with (inside corner - outside corner) of the
          // first crossed edge.
          const int e0 = cyc[0];
          const int ca = kEdgeCorner[e0][0], cb = kEdgeCorner[e0][1];
          const int cin = inside[ca] ? ca : cb;
          const int cout = inside[ca] ? cb : ca;
          auto pin = field.position(cx + kCornerOffset[cin][0],
                                    cy + kCornerOffset[cin][1],
                                    cz + kCornerOffset[cin][2]);
          auto pout = field.position(cx + kCornerOffset[cout][0],
                                     cy + kCornerOffset[cout][1],
                                     cz + kCornerOffset[cout][2]);
          double normal[3] = {0, 0, 0};
          for (size_t i = 0; i < ids.size(); ++i) {
            const auto& p = mesh.vertices[size_t(ids[i])];
            const auto& q = mesh.vertices[size_t(ids[(i + 1) % ids.size()])];
            normal[0] += (p[1] - q[1]) * (p[2] + q[2]);
            normal[1] += (p[2] - q[2]) * (p[0] + q[0]);
            normal[2] += (p[0] - q[0]) * (p[1] + q[1]);
          }
          const double dot = normal[0] * (pin[0] - pout[0]) +
                             normal[1] * (pin[1] - pout[1]) +
                             normal[2] * (pin[2] - pout[2]);
          if (dot < 0.0) std::reverse(ids.begin(), ids.end());

          for (size_t i = 1; i + 1 < ids.size(); ++i) {
            const int64_t t0 = ids[0], t1 = ids[i], t2 = ids[i + 1];
            if (t0 == t1 || t1 == t2 || t0 == t2) continue;
            mesh.triangles.push_back({t0, t1, t2});
          }
        }
      }
  return mesh;
}

bool watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<int64_t, int64_t>, int> edge_count;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      int64_t a = tri[size_t(k)], b = tri[size_t((k + 1) % 3)];
      if (a > b) std::swap(a, b);
      edge_count[{a, b}] += 1;
    }
  for (const auto& [edge, count] : edge_count)
    if (count != 2) return false;
  return true;
}

}  // namespace pcdiff
