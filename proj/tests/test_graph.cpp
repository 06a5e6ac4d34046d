#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "helpers.hpp"

using namespace aggnet;
using namespace aggnet::testing;

TEST_CASE("load_graph: seven-node example file") {
  DataGraph g = seven_node_graph();
  CHECK(g.node_count() == 7);
  CHECK(g.edge_count() == 25);
  CHECK(g.find("a").has_value());
  CHECK(g.find("g").has_value());
  // g has only incoming edges
  CHECK(g.out(*g.find("g")).empty());
  CHECK(g.in(*g.find("g")).size() == 6);
}

TEST_CASE("load_graph: empty file") {
  std::istringstream in("");
  DataGraph g = load_graph(in);
  CHECK(g.node_count() == 0);
  CHECK(g.edge_count() == 0);
}

TEST_CASE("load_graph: duplicate lines collapse") {
  std::istringstream in("a\tb\na\tb\n");
  DataGraph g = load_graph(in);
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 1);
}

TEST_CASE("load_graph: comments and symmetric option") {
  std::istringstream in("# comment\na\tb\n");
  DataGraph g = load_graph(in, {.symmetric = true});
  CHECK(g.edge_count() == 2);
  CHECK(g.has_edge(*g.find("a"), *g.find("b")));
  CHECK(g.has_edge(*g.find("b"), *g.find("a")));
}

TEST_CASE("load_graph: malformed line reports the line number") {
  std::istringstream in("a\tb\njustonefield\n");
  CHECK_THROWS_WITH_AS(load_graph(in), doctest::Contains("line 2"), Error);
}

TEST_CASE("load_graph: self loop rejected with node id") {
  std::istringstream in("a\ta\n");
  CHECK_THROWS_WITH_AS(load_graph(in), doctest::Contains("a"), Error);
}

TEST_CASE("neighborhood: running example N(a) = {c,d,e,f}") {
  DataGraph g = seven_node_graph();
  QuerySpec q;
  auto n = neighborhood(g, q, *g.find("a"));
  std::vector<NodeId> want{*g.find("c"), *g.find("d"), *g.find("e"), *g.find("f")};
  std::sort(want.begin(), want.end());
  CHECK(n == want);
}

TEST_CASE("neighborhood: isolated node") {
  DataGraph g;
  NodeId v = g.intern("x");
  QuerySpec q;
  CHECK(neighborhood(g, q, v).empty());
}

TEST_CASE("neighborhood: unknown node") {
  DataGraph g;
  QuerySpec q;
  CHECK_THROWS_AS(neighborhood(g, q, 7), Error);
}

TEST_CASE("neighborhood: k=2 equals BFS oracle on random graphs") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    DataGraph g = random_graph(10, 2.0, seed);
    QuerySpec q;
    q.hops = 2;
    for (NodeId v = 0; v < g.max_id(); ++v) {
      CAPTURE(seed);
      CAPTURE(v);
      CHECK(neighborhood(g, q, v) == bfs_neighborhood_oracle(g, q, v));
    }
  }
}

TEST_CASE("neighborhood: never contains the node itself") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    DataGraph g = random_graph(30, 4.0, seed);
    for (int hops = 1; hops <= 3; ++hops) {
      QuerySpec q;
      q.hops = hops;
      for (NodeId v = 0; v < g.max_id(); ++v) {
        auto n = neighborhood(g, q, v);
        CHECK(!std::binary_search(n.begin(), n.end(), v));
      }
    }
  }
}

TEST_CASE("neighborhood: writer filter keeps only matching attributes") {
  DataGraph g = seven_node_graph();
  for (NodeId v = 0; v < g.max_id(); ++v) g.set_attr(v, "team", v % 2 ? "red" : "blue");
  QuerySpec q;
  q.writer_filter = AttrTest{"team", "red"};
  for (NodeId w : neighborhood(g, q, *g.find("a"))) CHECK(w % 2 == 1);
}

TEST_CASE("derive_bipartite: running example shape") {
  DataGraph g = seven_node_graph();
  QuerySpec q;
  BipartiteGraph a = derive_bipartite(g, q);
  CHECK(a.edge_count() == 25);
  CHECK(a.readers().size() == 7);
  auto deg = a.writer_degrees();
  CHECK(deg[*g.find("g")] == 0); // g feeds no reader
  CHECK(deg[*g.find("a")] == 5);
  CHECK(deg[*g.find("b")] == 5);
  CHECK(deg[*g.find("d")] == 3);
}

TEST_CASE("derive_bipartite: reader predicate selecting nothing") {
  DataGraph g = seven_node_graph();
  QuerySpec q;
  q.reader_pred = AttrTest{"kind", "reader"};
  BipartiteGraph a = derive_bipartite(g, q);
  CHECK(a.readers().empty());
  CHECK(a.edge_count() == 0);
}

TEST_CASE("derive_bipartite: per-reader inputs equal neighborhood() on random graphs") {
  DataGraph g = random_graph(50, 4.0, 77);
  QuerySpec q;
  q.hops = 2;
  BipartiteGraph a = derive_bipartite(g, q);
  for (NodeId r : a.readers()) CHECK(a.inputs[r] == neighborhood(g, q, r));
}

TEST_CASE("derive_bipartite: deterministic") {
  DataGraph g = random_graph(40, 3.0, 5);
  QuerySpec q;
  BipartiteGraph a1 = derive_bipartite(g, q);
  BipartiteGraph a2 = derive_bipartite(g, q);
  CHECK(a1.inputs == a2.inputs);
}

TEST_CASE("derive_bipartite: k=1 edge count equals data-graph edges into readers") {
  DataGraph g = random_graph(40, 3.0, 9);
  QuerySpec q;
  BipartiteGraph a = derive_bipartite(g, q);
  CHECK(a.edge_count() == g.edge_count());
}

TEST_CASE("record_write: monotone stream") {
  DataGraph g = seven_node_graph();
  NodeId a = *g.find("a");
  g.record_write(a, 1, 1);
  g.record_write(a, 4, 4);
  CHECK(g.stream(a).size() == 2);
  CHECK(g.stream(a)[0].value == 1);
  CHECK(g.stream(a)[1].value == 4);
}

TEST_CASE("record_write: unknown node") {
  DataGraph g;
  CHECK_THROWS_AS(g.record_write(3, 1, 1), Error);
}

TEST_CASE("record_write: out-of-order timestamp rejected") {
  DataGraph g = seven_node_graph();
  NodeId a = *g.find("a");
  g.record_write(a, 5, 1);
  CHECK_THROWS_AS(g.record_write(a, 4, 2), Error);
}

TEST_CASE("record_write: long stream keeps every entry") {
  DataGraph g = seven_node_graph();
  NodeId a = *g.find("a");
  for (int i = 0; i < 1000; ++i) g.record_write(a, i, i);
  CHECK(g.stream(a).size() == 1000);
}

TEST_CASE("query spec validation") {
  QuerySpec q;
  q.hops = 0;
  CHECK_THROWS_AS(q.check(), Error);
  q.hops = 1;
  q.window = WindowSpec::count(0);
  CHECK_THROWS_AS(q.check(), Error);
}
