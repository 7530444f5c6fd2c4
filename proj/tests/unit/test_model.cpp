#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "misc/model_io.hpp"

using namespace misc;
using namespace misc::model;
using misc::test::random_tensor;

namespace {

NetworkConfig small_net() {
  NetworkConfig net;
  net.base_channels = 4;
  net.depth = 1;
  net.kernel_size = 3;
  return net;
}

}  // namespace

TEST_CASE("coupling groups map bijectively onto strategy x order") {
  std::set<std::pair<Strategy, Order>> seen;
  for (char g = 'a'; g <= 'j'; ++g) {
    const auto c = CouplingConfig::from_group(g);
    CHECK(c.group() == g);
    seen.insert({c.strategy, c.order});
  }
  CHECK(seen.size() == 10);
  CHECK(CouplingConfig::from_group('i') == CouplingConfig{Strategy::Shared, Order::FilterFirst});
  CHECK(CouplingConfig::from_group('a') == CouplingConfig{Strategy::Parallel, Order::FilterFirst});
  CHECK(CouplingConfig{} == CouplingConfig::from_group('i'));
  CHECK_THROWS_AS(CouplingConfig::from_group('k'), ConfigError);
  CHECK(parse_strategy(to_string(Strategy::SemiShared)) == Strategy::SemiShared);
  CHECK(parse_order(to_string(Order::ResidualFirst)) == Order::ResidualFirst);
}

TEST_CASE("network config validation") {
  NetworkConfig net;
  net.kernel_size = 4;
  CHECK_THROWS_AS(net.validate(), ConfigError);
  net.kernel_size = 7;
  net.depth = 0;
  CHECK_THROWS_AS(net.validate(), ConfigError);
  CHECK_THROWS_AS(build_model(net, {}, 1), ConfigError);
}

TEST_CASE("every coupling runs on 64x64 with finite outputs; sharing shrinks the model") {
  NetworkConfig net;
  auto rng = make_rng(1, "couplings");
  const auto img = random_tensor<float>(rng, {3, 64, 64}, 0, 1);
  std::map<Strategy, std::size_t> counts;
  for (char g = 'a'; g <= 'j'; ++g) {
    const auto c = CouplingConfig::from_group(g);
    const auto state = build_model(net, c, 7);
    const auto r = forward(state, img);
    CHECK(r.output.all_finite());
    CHECK(r.output.shape() == img.shape());
    counts[c.strategy] = state.parameter_count();
  }
  CHECK(counts[Strategy::Shared] < counts[Strategy::SemiShared]);
  CHECK(counts[Strategy::SemiShared] < counts[Strategy::Parallel]);
}

TEST_CASE("fresh model: identity alignment, low-pass filtering, zero residual, intermediate shapes") {
  NetworkConfig net;
  const auto state = build_model(net, {}, 3);
  auto rng = make_rng(2, "fresh");
  const auto img = random_tensor<float>(rng, {3, 16, 16}, 0, 1);
  const auto r = forward(state, img);
  CHECK(r.flow.shape() == Shape{2, 16, 16});
  CHECK(r.mask.shape() == Shape{1, 16, 16});
  CHECK(r.aligned == img);
  for (float v : r.flow.data()) CHECK(v == 0.0f);
  for (float v : r.residual.data()) CHECK(v == 0.0f);
  CHECK(r.filtered.shape() == img.shape());
  CHECK(max_abs_diff(r.filtered, scf::scf_filter(img, r.scf_params)) <= 1e-6);
  // Unit gain: a constant image stays constant.
  const auto flat = forward(state, Tensor({3, 16, 16}, 0.4f));
  for (float v : flat.output.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-5));
  CHECK(forward(state, img).output == r.output);
}

TEST_CASE("build_model is deterministic in the seed") {
  const auto net = small_net();
  const auto a = build_model(net, {}, 11), b = build_model(net, {}, 11), c = build_model(net, {}, 12);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == c.params);
}

TEST_CASE("forward rejects sizes not divisible by 2^depth") {
  const auto state = build_model(NetworkConfig{}, {}, 1);
  CHECK_THROWS_AS(forward(state, Tensor({3, 18, 16})), InputError);
  CHECK_THROWS_AS(forward(state, Tensor({2, 16, 16})), InputError);
}

TEST_CASE("component switches remove their estimators") {
  auto net = small_net();
  net.components = Components{false, false, false, false};
  const auto base = build_model(net, {}, 1);
  for (const auto& [name, t] : base.params) {
    CHECK(name.find("flow_est") == std::string::npos);
    CHECK(name.find("kernel_est") == std::string::npos);
  }
  // Residual-only: the output equals input plus residual.
  const auto img = Tensor({3, 8, 8}, 0.25f);
  const auto r = forward(base, img);
  CHECK(r.output == img + r.residual);
}

TEST_CASE("MMDL: save/load/save is byte identical, corruption is reported with offsets") {
  misc::test::TempDir dir("mmdl");
  const auto state = build_model(small_net(), CouplingConfig::from_group('e'), 4);
  const auto bytes = encode_model(state);
  save_model(state, dir.path() / "m.mmdl");
  const auto loaded = load_model(dir.path() / "m.mmdl");
  CHECK(loaded.params == state.params);
  CHECK(loaded.net == state.net);
  CHECK(loaded.coupling == state.coupling);
  CHECK(encode_model(loaded) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_model(bad), IoError);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
  try {
    decode_model(cut);
    FAIL("truncated model accepted");
  } catch (const IoError& e) {
    CHECK(e.offset() > 0);
  }
  CHECK_THROWS_AS(load_model(dir.path() / "missing.mmdl"), IoError);
}

TEST_CASE("empty model round trips") {
  ModelState empty;
  empty.net = small_net();
  const auto back = decode_model(encode_model(empty));
  CHECK(back.params.empty());
  CHECK(back.net == empty.net);
}

TEST_CASE("loading against a different kernel size names the offending tensors") {
  misc::test::TempDir dir("mismatch");
  const auto state = build_model(small_net(), {}, 4);
  save_model(state, dir.path() / "m.mmdl");
  auto other = small_net();
  other.kernel_size = 5;
  try {
    load_model(dir.path() / "m.mmdl", other, CouplingConfig{});
    FAIL("mismatched kernel size accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("kernel_est") != std::string::npos);
  }
}

TEST_CASE("network keys round trip through key=value text") {
  auto net = small_net();
  net.max_flow = 3.25;
  net.components.offset = false;
  const auto coupling = CouplingConfig::from_group('h');
  NetworkConfig back;
  CouplingConfig back_c;
  for (const auto& [k, v] : network_to_key_values(net, coupling)) CHECK(apply_network_key(k, v, back, back_c));
  CHECK(back == net);
  CHECK(back_c == coupling);
  CHECK_FALSE(apply_network_key("nonsense", "1", back, back_c));
  CHECK_THROWS_AS(apply_network_key("depth", "two", back, back_c), ConfigError);
}
