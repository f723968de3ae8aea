#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "helpers/test_util.hpp"
#include "seren/policy.hpp"

using namespace seren;
using namespace seren::testutil;
using doctest::Approx;

namespace {

TabularPolicy small_policy(std::uint64_t seed = 0, double scale = 0.0) {
  return TabularPolicy({"a", "b", "c"}, {"p0", "p1"}, 4, seed, scale);
}

}  // namespace

TEST_CASE("policy construction validates its inputs") {
  CHECK_NOTHROW(small_policy());
  CHECK_THROWS_AS(TabularPolicy({}, {"p"}, 2), ValidationError);
  CHECK_THROWS_AS(TabularPolicy({"a"}, {"p"}, 0), ValidationError);
  CHECK_THROWS_AS(TabularPolicy({"a"}, {"p"}, -1), ValidationError);
  CHECK_THROWS_AS(TabularPolicy({"a", ""}, {"p"}, 2), ValidationError);
  CHECK_THROWS_AS(TabularPolicy({"a", "a"}, {"p"}, 2), ValidationError);
  CHECK_THROWS_AS(TabularPolicy({"a"}, {"p", "p"}, 2), ValidationError);
}

TEST_CASE("policy shape and parameter layout") {
  TabularPolicy policy = small_policy();
  CHECK(policy.vocab_size() == 3);
  CHECK(policy.max_len() == 4);
  // One extra background row beyond the two known prompts.
  CHECK(policy.rows() == 3);
  CHECK(policy.background_row() == 2);
  CHECK(policy.param_count() == 3u * 4u * 3u);
  CHECK(policy.params().size() == policy.param_count());

  // Row-major layout: (row, pos, tok) -> (row*max_len + pos)*vocab + tok.
  CHECK(policy.index_of(0, 0, 0) == 0u);
  CHECK(policy.index_of(0, 0, 2) == 2u);
  CHECK(policy.index_of(0, 1, 0) == 3u);
  CHECK(policy.index_of(1, 0, 0) == 12u);
  CHECK(policy.index_of(2, 3, 2) == 35u);

  CHECK_THROWS_AS(policy.index_of(-1, 0, 0), ValidationError);
  CHECK_THROWS_AS(policy.index_of(3, 0, 0), ValidationError);
  CHECK_THROWS_AS(policy.index_of(0, 4, 0), ValidationError);
  CHECK_THROWS_AS(policy.index_of(0, -1, 0), ValidationError);
  CHECK_THROWS_AS(policy.index_of(0, 0, 3), ValidationError);
  CHECK_THROWS_AS(policy.index_of(0, 0, -1), ValidationError);
}

TEST_CASE("zero init gives uniform distributions") {
  TabularPolicy policy = small_policy();
  for (double v : policy.params()) CHECK(v == 0.0);

  auto p = policy.probs(0, 0);
  REQUIRE(p.size() == 3);
  for (double v : p) CHECK(v == Approx(1.0 / 3.0).epsilon(1e-15));

  // logprob of an L-token response is exactly -L * ln(V).
  std::vector<int> resp{0, 2, 1};
  CHECK(policy.logprob("p0", resp) ==
        Approx(-3.0 * std::log(3.0)).epsilon(1e-15));
  CHECK(policy.logprob("no such prompt", resp) ==
        Approx(-3.0 * std::log(3.0)).epsilon(1e-15));
  std::vector<int> one{1};
  CHECK(policy.logprob(0, one) == Approx(-std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("random init is bounded and seed-reproducible") {
  TabularPolicy a = small_policy(42, 0.5);
  TabularPolicy b = small_policy(42, 0.5);
  TabularPolicy c = small_policy(43, 0.5);

  bool any_nonzero = false;
  for (double v : a.params()) {
    CHECK(v >= -0.5);
    CHECK(v < 0.5);
    if (v != 0.0) any_nonzero = true;
  }
  CHECK(any_nonzero);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("prompt rows and the background row") {
  TabularPolicy policy = small_policy();
  CHECK(policy.has_prompt("p0"));
  CHECK(policy.has_prompt("p1"));
  CHECK_FALSE(policy.has_prompt("p2"));
  CHECK(policy.row_of("p0") == 0);
  CHECK(policy.row_of("p1") == 1);
  CHECK(policy.row_of("p2") == policy.background_row());
  CHECK(policy.row_of("") == policy.background_row());
}

TEST_CASE("token lookup and strict encode/decode") {
  TabularPolicy policy = small_policy();
  CHECK(policy.token_id("a") == 0);
  CHECK(policy.token_id("c") == 2);
  CHECK(policy.token_id("z") == -1);
  CHECK(policy.token(1) == "b");
  CHECK_THROWS_AS(policy.token(-1), ValidationError);
  CHECK_THROWS_AS(policy.token(3), ValidationError);

  std::vector<std::string> tokens{"c", "a", "b"};
  auto ids = policy.encode(tokens);
  CHECK(ids == std::vector<int>{2, 0, 1});
  CHECK(policy.decode(ids) == tokens);

  CHECK(policy.encode({}).empty());
  CHECK_THROWS_AS(policy.encode({"a", "zebra"}), ValidationError);
  CHECK_THROWS_AS(policy.encode({"a", "a", "a", "a", "a"}), ValidationError);
  std::vector<int> bad{0, 5};
  CHECK_THROWS_AS(policy.decode(bad), ValidationError);
}

TEST_CASE("logit access, softmax consistency and hand-set distribution") {
  TabularPolicy policy = small_policy();
  policy.logit(0, 0, 0) = std::log(3.0);
  CHECK(policy.logit(0, 0, 0) == Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(policy.logits(0, 0).size() == 3);
  CHECK(policy.logits(0, 0)[0] == Approx(std::log(3.0)).epsilon(1e-15));

  // Slice is now [ln 3, 0, 0] -> probabilities 3/5, 1/5, 1/5.
  auto p = policy.probs(0, 0);
  CHECK(p[0] == Approx(0.6).epsilon(1e-14));
  CHECK(p[1] == Approx(0.2).epsilon(1e-14));
  CHECK(p[2] == Approx(0.2).epsilon(1e-14));

  auto lp = policy.log_probs(0, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::exp(lp[i]) == Approx(p[i]).epsilon(1e-13));
  }

  std::vector<int> resp{0, 1};
  CHECK(policy.logprob(0, resp) ==
        Approx(std::log(0.6) - std::log(3.0)).epsilon(1e-13));
  // The key overload routes through row_of.
  CHECK(policy.logprob("p0", resp) == policy.logprob(0, resp));

  // Shifting a whole slice by a constant leaves the distribution unchanged.
  double before = policy.logprob(0, resp);
  for (int t = 0; t < policy.vocab_size(); ++t) policy.logit(0, 0, t) += 7.5;
  CHECK(policy.logprob(0, resp) == Approx(before).epsilon(1e-12));
}

TEST_CASE("logprob rejects malformed responses") {
  TabularPolicy policy = small_policy();
  std::vector<int> empty;
  std::vector<int> too_long{0, 0, 0, 0, 0};
  std::vector<int> bad_tok{0, 7};
  std::vector<int> ok{0};
  CHECK_THROWS_AS(policy.logprob(0, empty), ValidationError);
  CHECK_THROWS_AS(policy.logprob(0, too_long), ValidationError);
  CHECK_THROWS_AS(policy.logprob(0, bad_tok), ValidationError);
  CHECK_THROWS_AS(policy.logprob(9, ok), ValidationError);
}

TEST_CASE("checkpoint round-trip is bitwise and keeps meta") {
  TempDir dir("policy");
  TabularPolicy policy = small_policy(123, 1.5);
  policy.meta = R"({"loss":"ipo","tau":0.1})";
  auto path = dir.path() / "policy.bin";
  policy.save(path);

  TabularPolicy back = TabularPolicy::load(path);
  CHECK(back == policy);
  CHECK(back.meta == policy.meta);
  CHECK(back.params() == policy.params());  // exact, not approximate
  CHECK(back.vocab() == policy.vocab());
  CHECK(back.prompt_keys() == policy.prompt_keys());
  CHECK(back.max_len() == policy.max_len());

  // Saving the loaded policy again reproduces the file byte for byte.
  auto path2 = dir.path() / "policy2.bin";
  back.save(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string bytes1((std::istreambuf_iterator<char>(f1)),
                     std::istreambuf_iterator<char>());
  std::string bytes2((std::istreambuf_iterator<char>(f2)),
                     std::istreambuf_iterator<char>());
  CHECK(bytes1 == bytes2);
  CHECK_FALSE(bytes1.empty());
}

TEST_CASE("checkpoint loading rejects corrupted files") {
  TempDir dir("policy_bad");
  TabularPolicy policy = small_policy(5, 0.3);
  auto good = dir.path() / "good.bin";
  policy.save(good);

  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  SUBCASE("missing file") {
    CHECK_THROWS_AS(TabularPolicy::load(dir.path() / "nope.bin"), SerenError);
  }
  SUBCASE("bad magic") {
    auto bad = dir.path() / "magic.bin";
    std::string tampered = bytes;
    tampered[0] = 'X';
    write_file(bad, tampered);
    CHECK_THROWS_WITH_AS(TabularPolicy::load(bad),
                         doctest::Contains("bad magic"), ValidationError);
  }
  SUBCASE("truncated payload") {
    auto bad = dir.path() / "trunc.bin";
    write_file(bad, bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_WITH_AS(TabularPolicy::load(bad),
                         doctest::Contains("truncated"), ValidationError);
  }
  SUBCASE("trailing bytes") {
    auto bad = dir.path() / "extra.bin";
    write_file(bad, bytes + "x");
    CHECK_THROWS_WITH_AS(TabularPolicy::load(bad),
                         doctest::Contains("trailing"), ValidationError);
  }
  SUBCASE("header is not JSON") {
    auto bad = dir.path() / "header.bin";
    write_file(bad, "SERENPOLICY 1\nnot json\n");
    CHECK_THROWS_AS(TabularPolicy::load(bad), ValidationError);
  }
  SUBCASE("header missing fields") {
    auto bad = dir.path() / "fields.bin";
    write_file(bad, "SERENPOLICY 1\n{\"vocab\":[\"a\"]}\n");
    CHECK_THROWS_AS(TabularPolicy::load(bad), ValidationError);
  }
  SUBCASE("missing header line entirely") {
    auto bad = dir.path() / "noheader.bin";
    write_file(bad, "SERENPOLICY 1");
    CHECK_THROWS_AS(TabularPolicy::load(bad), ValidationError);
  }
}
