#include <algorithm>
#include <limits>
#include <queue>

#include "rainbow/errors.hpp"
#include "rainbow/rainbow_tree.hpp"

namespace rainbow {

FeasibilityCensus FeasibilityCensus::from_keys(const RainbowTree& t, const std::vector<uint64_t>& keys) {
  FeasibilityCensus c;
  c.geometry = t.geometry();
  const int L = c.geometry.levels();
  c.own.assign(L + 1, {});
  for (int i = 2; i <= L; ++i) c.own[i].assign(c.geometry.m(i), 0);
  for (uint64_t k : keys) {
    const NodeRef v = t.node_of(k);
    ++c.own[v.level][v.index];
  }
  return c;
}

uint64_t FeasibilityCensus::subtree_keys(NodeRef v) const {
  if (v.level < 2) return 0;
  const uint64_t step = geometry.m(v.level);
  uint64_t q = 0;
  for (int a = 2; a <= v.level; ++a)
    for (uint64_t j = v.index; j < geometry.m(a); j += step) q += own[a][j];
  return q;
}

namespace {

std::vector<NodeRef> kids_of(const TreeGeometry& g, NodeRef s) {
  std::vector<NodeRef> out;
  for (uint64_t j = s.index; j < g.m(s.level - 1); j += g.m(s.level)) out.push_back({s.level - 1, j});
  return out;
}

// Dinic max-flow on a small graph.
class MaxFlow {
 public:
  explicit MaxFlow(size_t n) : adj_(n), level_(n), it_(n) {}
  void edge(size_t a, size_t b, uint64_t cap) {
    adj_[a].push_back({b, adj_[b].size(), cap});
    adj_[b].push_back({a, adj_[a].size() - 1, 0});
  }
  uint64_t run(size_t s, size_t t) {
    uint64_t flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (uint64_t f = dfs(s, t, std::numeric_limits<uint64_t>::max())) flow += f;
    }
    return flow;
  }

 private:
  struct Edge {
    size_t to, rev;
    uint64_t cap;
  };
  bool bfs(size_t s, size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const size_t v = q.front();
      q.pop();
      for (const Edge& e : adj_[v])
        if (e.cap > 0 && level_[e.to] < 0) {
          level_[e.to] = level_[v] + 1;
          q.push(e.to);
        }
    }
    return level_[t] >= 0;
  }
  uint64_t dfs(size_t v, size_t t, uint64_t f) {
    if (v == t) return f;
    for (size_t& i = it_[v]; i < adj_[v].size(); ++i) {
      Edge& e = adj_[v][i];
      if (e.cap == 0 || level_[e.to] != level_[v] + 1) continue;
      if (uint64_t d = dfs(e.to, t, std::min(f, e.cap))) {
        e.cap -= d;
        adj_[e.to][e.rev].cap += d;
        return d;
      }
    }
    return 0;
  }
  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<size_t> it_;
};

}  // namespace

bool weakly_feasible_by_counting(const FeasibilityCensus& c, NodeRef s) {
  const TreeGeometry& g = c.geometry;
  require(s.level >= 2 && s.level <= g.levels(), "weakly_feasible_by_counting: node must have a buffer");
  uint64_t deficit = 0;
  for (NodeRef k : kids_of(g, s)) {
    const uint64_t t = g.subtree_size(k.level, k.index), q = c.subtree_keys(k), b = k.level == 1 ? 1 : g.b(k.level);
    if (q > t || q + b < t) return false;
    deficit += t - q;
  }
  const uint64_t own = c.own[s.level][s.index];
  return deficit <= own && own - deficit <= g.b(s.level);
}

bool weakly_feasible_by_matching(const FeasibilityCensus& c, NodeRef s) {
  const TreeGeometry& g = c.geometry;
  require(s.level >= 2 && s.level <= g.levels(), "weakly_feasible_by_matching: node must have a buffer");
  const uint64_t t_s = g.subtree_size(s.level, s.index), b_s = g.b(s.level), q_s = c.subtree_keys(s);
  // The buffer of s takes whatever the subtrees below it do not.
  if (q_s + b_s < t_s || q_s > t_s) return false;
  const uint64_t s_bin = q_s + b_s - t_s;

  const auto kids = kids_of(g, s);
  // Nodes: source, sink, s's bin, per child a buffer bin and a below bin,
  // s's own group, then one group per child subtree.
  const size_t src = 0, sink = 1, sbin = 2, base = 3, own_group = base + 2 * kids.size();
  MaxFlow mf(own_group + 1 + kids.size());
  mf.edge(sbin, sink, s_bin);
  mf.edge(src, own_group, c.own[s.level][s.index]);
  mf.edge(own_group, sbin, c.own[s.level][s.index]);
  for (size_t k = 0; k < kids.size(); ++k) {
    const NodeRef ch = kids[k];
    const uint64_t t = g.subtree_size(ch.level, ch.index), b = ch.level == 1 ? 1 : g.b(ch.level);
    const size_t buf = base + 2 * k, below = buf + 1, grp = own_group + 1 + k;
    mf.edge(buf, sink, b);
    mf.edge(below, sink, t - b);
    mf.edge(own_group, buf, b);
    const uint64_t q = c.subtree_keys(ch);
    mf.edge(src, grp, q);
    mf.edge(grp, buf, b);
    mf.edge(grp, below, t - b);
  }
  return mf.run(src, sink) == q_s;
}

}  // namespace rainbow
