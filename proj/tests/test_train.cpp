// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "resdiff/checkpoint.hpp"
#include "resdiff/train.hpp"
#include "test_util.hpp"

using namespace resdiff;

namespace {

DenoiserConfig small_model(Objective objective = Objective::X0) {
  DenoiserConfig c;
  c.target_channels = 2;
  c.condition_channels = objective == Objective::X0 ? 1 : 2;
  c.base_width = 8;
  c.num_levels = 2;
  c.blocks_per_level = 1;
  c.time_embed_dim = 16;
  c.objective = objective;
  return c;
}

std::vector<TrainingExample> make_examples(int n, int size, std::uint64_t seed,
                                           int cond_channels = 1) {
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.target = testutil::random_tensor(2, size, size, seed + 2 * std::uint64_t(i));
    ex.condition = testutil::random_tensor(cond_channels, size, size, seed + 2 * std::uint64_t(i) + 1);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingItem> make_items(const std::vector<TrainingExample>& ex, std::uint64_t seed) {
  const NoiseSchedule s{ScheduleConfig{}};
  const DdpmSchedule ddpm;
  RngState rng(seed);
  std::vector<TrainingItem> items;
  for (const auto& e : ex)
    items.push_back(draw_item(e, Objective::X0, s, ddpm, false, true, rng));
  return items;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (const char* old = std::getenv("RESDIFF_THREADS")) saved_ = old;
    ::setenv("RESDIFF_THREADS", value, 1);
  }
  ~ThreadsEnv() {
    if (saved_.empty())
      ::unsetenv("RESDIFF_THREADS");
    else
      ::setenv("RESDIFF_THREADS", saved_.c_str(), 1);
  }

 private:
  std::string saved_;
};

}  // namespace

TEST_CASE("batch gradients match finite differences of the batch loss") {
  const DenoiserConfig cfg = small_model();
  const Denoiser<double> net(cfg);
  const DenoiserParams p = init_params(cfg, 4);
  const std::vector<double> theta(p.values.begin(), p.values.end());
  auto items = make_items(make_examples(3, 8, 10), 5);
  items[1].weight = 2.5;
  std::vector<double> grads;
  const double loss = batch_gradients(net, theta.data(), std::span<const TrainingItem>(items), grads);
  CHECK(loss == doctest::Approx(batch_loss(net, theta.data(), std::span<const TrainingItem>(items))));
  RngState rng(6);
  int good = 0;
  const int trials = 60;
  for (int k = 0; k < trials; ++k) {
    const auto i = std::size_t(rng.uniform_int(0, std::int64_t(theta.size()) - 1));
    std::vector<double> th = theta;
    const double h = 1e-5;
    th[i] += h;
    const double up = batch_loss(net, th.data(), std::span<const TrainingItem>(items));
    th[i] -= 2 * h;
    const double down = batch_loss(net, th.data(), std::span<const TrainingItem>(items));
    const double fd = (up - down) / (2 * h);
    if (std::abs(fd - grads[i]) <= 1e-3 * std::max({std::abs(fd), std::abs(grads[i]), 1e-6}))
      ++good;
  }
  CHECK(good >= trials - 1);
}

TEST_CASE("batch gradients do not depend on the thread count") {
  const DenoiserConfig cfg = small_model();
  const Denoiser<float> net(cfg);
  const DenoiserParams p = init_params(cfg, 4);
  const auto items = make_items(make_examples(5, 16, 20), 7);
  std::vector<float> g1, g3;
  double l1 = 0, l3 = 0;
  {
    ThreadsEnv env("1");
    l1 = batch_gradients(net, p.values.data(), std::span<const TrainingItem>(items), g1);
  }
  {
    ThreadsEnv env("3");
    l3 = batch_gradients(net, p.values.data(), std::span<const TrainingItem>(items), g3);
  }
  CHECK(l1 == l3);
  CHECK(g1 == g3);
}

TEST_CASE("frozen parameters get zero gradient and stay fixed") {
  const DenoiserConfig cfg = small_model();
  TrainConfig tc;
  tc.max_steps = 3;
  tc.learning_rate = 1e-3;
  tc.frozen_prefixes = {"enc.", "time."};
  const auto data = make_examples(4, 16, 30);
  const NoiseSchedule s{ScheduleConfig{}};
  const TrainState start = initial_state(cfg, tc);
  const auto mask = frozen_mask(start.params.entries, tc.frozen_prefixes);
  REQUIRE(std::count(mask.begin(), mask.end(), true) > 0);
  REQUIRE(std::count(mask.begin(), mask.end(), false) > 0);

  const Denoiser<float> net(cfg);
  const auto items = make_items(data, 3);
  std::vector<float> g;
  batch_gradients(net, start.params.values.data(), std::span<const TrainingItem>(items), g, &mask);
  const TrainResult r = train(data, tc, s, DdpmSchedule{}, start);
  for (std::size_t e = 0; e < mask.size(); ++e) {
    const ParamEntry& en = start.params.entries[e];
    const auto first = start.params.values.begin() + std::ptrdiff_t(en.offset);
    const bool unchanged = std::equal(first, first + std::ptrdiff_t(en.count),
                                      r.state.params.values.begin() + std::ptrdiff_t(en.offset));
    const bool zero_grad = std::all_of(g.begin() + std::ptrdiff_t(en.offset),
                                       g.begin() + std::ptrdiff_t(en.offset + en.count),
                                       [](float v) { return v == 0.0f; });
    CAPTURE(en.name);
    if (mask[e]) {
      CHECK(unchanged);
      CHECK(zero_grad);
    }
  }
  CHECK(r.state.params.values != start.params.values);
}

TEST_CASE("dihedral transforms") {
  const ImageTensor a = testutil::random_tensor(2, 3, 4, 1);
  CHECK(dihedral(a, 0) == a);
  std::vector<ImageTensor> all;
  for (int op = 0; op < 8; ++op) {
    const ImageTensor d = dihedral(a, op);
    CHECK(d.channels() == 2);
    CHECK(d.height() == (op & 4 ? 4 : 3));
    for (const auto& prev : all) CHECK(!(prev == d));
    all.push_back(d);
  }
  // Flips are involutions; transpose of a transpose is the identity.
  for (int op : {1, 2, 3, 4}) CHECK(dihedral(dihedral(a, op), op) == a);
  CHECK(dihedral(a, 1).at(0, 0, 0) == a.at(0, 0, 3));
  CHECK(dihedral(a, 2).at(1, 0, 0) == a.at(1, 2, 0));
  CHECK(dihedral(a, 4).at(0, 3, 1) == a.at(0, 1, 3));
}

TEST_CASE("draw_item") {
  const NoiseSchedule s{ScheduleConfig{}};
  const DdpmSchedule ddpm;
  const auto ex = make_examples(1, 8, 40)[0];
  RngState rng(1);
  SUBCASE("residual objective regresses x0") {
    std::vector<int> seen(16, 0);
    for (int i = 0; i < 400; ++i) {
      const TrainingItem it = draw_item(ex, Objective::X0, s, ddpm, false, false, rng);
      REQUIRE(it.t >= 1);
      REQUIRE(it.t <= 15);
      ++seen[std::size_t(it.t)];
      CHECK(it.target == ex.target);
      CHECK(it.condition == ex.condition);
      CHECK(it.weight == 1.0);
    }
    for (int t = 1; t <= 15; ++t) CHECK(seen[std::size_t(t)] > 0);
  }
  SUBCASE("weighted draws carry the x0-matching weight") {
    for (int i = 0; i < 50; ++i) {
      const TrainingItem it = draw_item(ex, Objective::X0, s, ddpm, true, false, rng);
      CHECK(it.weight == loss_weight(s, it.t));
    }
  }
  SUBCASE("baseline objective regresses the noise") {
    for (int i = 0; i < 20; ++i) {
      const TrainingItem it = draw_item(ex, Objective::Epsilon, s, ddpm, false, false, rng);
      CHECK(it.t >= 1);
      CHECK(it.t <= 1000);
      const float ab = float(ddpm.alpha_bar(it.t)), bb = float(ddpm.beta_bar(it.t));
      for (std::size_t j = 0; j < it.x_t.size(); ++j)
        CHECK(it.x_t.data()[j] ==
              doctest::Approx(ab * ex.target.data()[j] + bb * it.target.data()[j]).epsilon(1e-5));
    }
  }
  SUBCASE("augmentation applies the same transform to target and condition") {
    for (int i = 0; i < 20; ++i) {
      const TrainingItem it = draw_item(ex, Objective::X0, s, ddpm, false, true, rng);
      bool found = false;
      for (int op = 0; op < 8; ++op)
        if (dihedral(ex.target, op) == it.target && dihedral(ex.condition, op) == it.condition)
          found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  const DenoiserConfig cfg = small_model();
  TrainConfig tc;
  tc.max_steps = 2;
  const auto data = make_examples(2, 8, 50);
  ScheduleConfig sc;
  sc.steps = 8;
  sc.p = 0.7;
  Checkpoint ck;
  ck.schedule = sc;
  ck.ddpm.steps = 100;
  ck.training = train(data, tc, NoiseSchedule(sc), DdpmSchedule{}, initial_state(cfg, tc)).state;
  ck.params = ck.training->params;
  const auto bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.params.config == cfg);
  CHECK(back.params.values == ck.params.values);
  CHECK(back.schedule.steps == 8);
  CHECK(back.schedule.p == 0.7);
  CHECK(back.ddpm.steps == 100);
  REQUIRE(back.training.has_value());
  CHECK(back.training->step == 2);
  CHECK(back.training->adam.step == ck.training->adam.step);
  CHECK(back.training->adam.m == ck.training->adam.m);
  CHECK(back.training->adam.v == ck.training->adam.v);
  CHECK(back.training->rng.serialize() == ck.training->rng.serialize());
  CHECK(encode_checkpoint(back) == bytes);

  Checkpoint bare;
  bare.params = init_params(cfg, 1);
  const Checkpoint bare_back = decode_checkpoint(encode_checkpoint(bare));
  CHECK(!bare_back.training.has_value());
  CHECK(bare_back.params.values == bare.params.values);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_checkpoint(bad));
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS(decode_checkpoint(truncated));
  CHECK_THROWS(load_checkpoint("/nonexistent/model.rdck"));
}

TEST_CASE("resuming from a checkpoint is bit-exact") {
  const DenoiserConfig cfg = small_model();
  TrainConfig tc;
  tc.max_steps = 6;
  tc.learning_rate = 1e-3;
  tc.seed = 9;
  const auto data = make_examples(5, 16, 60);
  const NoiseSchedule s{ScheduleConfig{}};
  const TrainResult full = train(data, tc, s, DdpmSchedule{}, initial_state(cfg, tc));

  TrainConfig first = tc;
  first.max_steps = 3;
  const TrainResult half = train(data, first, s, DdpmSchedule{}, initial_state(cfg, tc));
  Checkpoint ck;
  ck.params = half.state.params;
  ck.training = half.state;
  const Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
  const TrainResult rest = train(data, tc, s, DdpmSchedule{}, *back.training);

  CHECK(rest.state.step == 6);
  CHECK(rest.state.params.values == full.state.params.values);
  CHECK(rest.state.adam.m == full.state.adam.m);
  REQUIRE(rest.losses.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(rest.losses[std::size_t(i)] == full.losses[std::size_t(3 + i)]);
}

TEST_CASE("checkpoint callback cadence") {
  TrainConfig tc;
  tc.max_steps = 5;
  tc.checkpoint_every = 2;
  std::vector<int> at;
  train(make_examples(2, 8, 70), tc, NoiseSchedule{ScheduleConfig{}}, DdpmSchedule{},
        initial_state(small_model(), tc), {}, [&](const TrainState& st) { at.push_back(st.step); });
  CHECK(at == std::vector<int>{2, 4, 5});
}

TEST_CASE("training overfits a tiny set") {
  const DenoiserConfig cfg = small_model();
  TrainConfig tc;
  tc.max_steps = 2000;
  tc.learning_rate = 1e-3;
  tc.batch_size = 2;
  tc.augment = false;
  tc.seed = 1;
  const auto data = make_examples(4, 16, 80);
  const TrainResult r =
      train(data, tc, NoiseSchedule{ScheduleConfig{}}, DdpmSchedule{}, initial_state(cfg, tc));
  auto window_mean = [&](std::size_t end) {
    return std::accumulate(r.losses.begin() + std::ptrdiff_t(end - 50),
                           r.losses.begin() + std::ptrdiff_t(end), 0.0) /
           50.0;
  };
  const double early = window_mean(50);
  const double late = window_mean(r.losses.size());
  CAPTURE(early);
  CAPTURE(late);
  CHECK(late * 10.0 <= early);
}

TEST_CASE("non-finite loss raises NumericError naming the batch") {
  auto data = make_examples(2, 8, 90);
  data[0].target.at(0, 1, 1) = std::numeric_limits<float>::quiet_NaN();
  data[1].target.at(1, 2, 2) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.max_steps = 1;
  try {
    train(data, tc, NoiseSchedule{ScheduleConfig{}}, DdpmSchedule{}, initial_state(small_model(), tc));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 1);
    CHECK(e.batch().size() == 2);
  }
}

TEST_CASE("training configuration errors") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = {};
  tc.learning_rate = -1;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = {};
  tc.beta2 = 1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = {};
  const std::vector<TrainingExample> none;
  CHECK_THROWS_AS(train(none, tc, NoiseSchedule{ScheduleConfig{}}, DdpmSchedule{},
                        initial_state(small_model(), tc)),
                  std::invalid_argument);
  // Baseline network trained on residual-shaped data: channel mismatch.
  tc.max_steps = 1;
  CHECK_THROWS_AS(train(make_examples(2, 8, 1), tc, NoiseSchedule{ScheduleConfig{}},
                        DdpmSchedule{}, initial_state(small_model(Objective::Epsilon), tc)),
                  std::invalid_argument);
}
