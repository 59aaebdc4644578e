#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "grle/mec_model.hpp"

using namespace grle;

TEST_CASE("transmission time") {
  CHECK(transmission_time(100.0, 80.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(transmission_time(50.0, 20.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(transmission_time(75.0, 100.0) == doctest::Approx(6.0).epsilon(1e-12));
  // float instantiation follows the same formula
  CHECK(transmission_time(100.0f, 80.0f) == doctest::Approx(10.0));
}

TEST_CASE("arrival time") {
  CHECK(arrival_time(0.0, 1, 30.0, 10.0) == 10.0);
  CHECK(std::abs(arrival_time(10.0, 2, 30.0, 5.0) - 35.0) < 1e-12);
  // backlogged device: previous arrival is later than the slot start
  CHECK(std::abs(arrival_time(25.0, 2, 10.0, 5.0) - 30.0) < 1e-12);
}

TEST_CASE("waiting time") {
  CHECK(waiting_time(0.0, 12.0) == 0.0);
  CHECK(std::abs(waiting_time(20.0, 12.0) - 8.0) < 1e-12);
  CHECK(waiting_time(12.0, 12.0) == 0.0);
}

TEST_CASE("computation time reproduces the exit table") {
  const ExitTable t = ExitTable::vgg16_default();
  CHECK(computation_time(t.base_time(4, 0), 1.0, 1.0) == 1.26);
  CHECK(computation_time(t.base_time(0, 1), 1.0, 1.0) == 0.73);
  CHECK(computation_time(t.base_time(3, 0), 1.0, 0.5) == doctest::Approx(1.42).epsilon(1e-12));
}

TEST_CASE("psi") {
  CHECK(psi(0.0, 30.0, PsiMode::literal) == 0.5);
  CHECK(psi(0.0, 30.0) == 1.0);
  CHECK(psi(10.0, 30.0) == doctest::Approx(0.3178).epsilon(1e-3));
  CHECK(psi(30.0, 30.0) == doctest::Approx(0.01340).epsilon(1e-3));
  // independent evaluation with std::exp
  CHECK(psi(10.0, 30.0) == doctest::Approx(2.0 * (1.0 - 1.0 / (1.0 + std::exp(-5.0 / 3.0)))).epsilon(1e-14));

  SUBCASE("strictly decreasing and inside (0, 1)") {
    for (PsiMode mode : {PsiMode::normalized, PsiMode::literal}) {
      double prev = psi(0.0, 30.0, mode);
      for (double t = 0.5; t <= 60.0; t += 0.5) {
        const double v = psi(t, 30.0, mode);
        CHECK(v < prev);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        prev = v;
      }
    }
  }
  CHECK(parse_psi_mode("literal") == PsiMode::literal);
  CHECK(to_string(PsiMode::normalized) == "normalized");
  CHECK_THROWS_AS(parse_psi_mode("sigmoid"), ConfigError);
}

TEST_CASE("exit table") {
  const ExitTable t = ExitTable::vgg16_default();
  REQUIRE(t.size() == 5);
  CHECK(t[4].exit_id == 17);
  CHECK(t[4].accuracy == 0.935);
  CHECK(t.max_accuracy() == 0.935);
  CHECK(t.final_exit() == 4);

  std::stringstream ss;
  write_exit_table(ss, t);
  const ExitTable back = parse_exit_table(ss);
  CHECK(back.server_types() == t.server_types());
  for (int l = 0; l < t.size(); ++l) {
    CHECK(back[l].exit_id == t[l].exit_id);
    CHECK(back[l].accuracy == t[l].accuracy);
    CHECK(back[l].base_time_ms == t[l].base_time_ms);
  }

  std::istringstream decreasing("exit_id accuracy a\n1 0.9 1.0\n2 0.8 2.0\n");
  CHECK_THROWS_AS(parse_exit_table(decreasing), ConfigError);
  std::istringstream slower("exit_id accuracy a\n1 0.8 2.0\n2 0.9 1.0\n");
  CHECK_THROWS_AS(parse_exit_table(slower), ConfigError);
  std::istringstream ragged("exit_id accuracy a b\n1 0.8 2.0\n");
  CHECK_THROWS_AS(parse_exit_table(ragged), ConfigError);
}

namespace {

const ExitTable kExits = ExitTable::vgg16_default();
const ModelParams kModel{};

}  // namespace

TEST_CASE("apply_decision hand cases") {
  SUBCASE("single task sees empty queues") {
    SlotInput s;
    s.slot = 1;
    s.tasks.push_back({0, 1, 100.0, 30.0, {80.0}, {80.0}, {}});
    s.jitter = {1.0};
    s.capacity_fraction = s.capacity_est = {1.0};
    NetworkState st = NetworkState::initial(1, 1, 2);
    const SlotResult r = apply_decision(st, s, {{{0, 0, 4}}}, kExits, kModel);
    const SlotOutcome& o = r.outcomes[0];
    CHECK(o.t_com == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(o.t_wait == 0.0);
    CHECK(o.t_cmp == 1.26);
    CHECK(o.t_total == o.t_com + o.t_wait + o.t_cmp);
    CHECK(o.success);
    CHECK(st.devices[0].last_arrival_ms == o.arrival_ms);
    CHECK(st.servers[0].free_at_ms == o.arrival_ms + o.t_cmp);
  }

  // Tasks with chosen transmission times and a custom exit table so the
  // computation times are exact.
  auto two_tasks = [](double a0, double a1, double cmp) {
    ExitTable t({"x"}, {{1, 0.5, Vector::Constant(1, cmp)}});
    SlotInput s;
    s.slot = 1;
    for (int m = 0; m < 2; ++m) {
      const double arrival = m == 0 ? a0 : a1;
      // rate such that size*8/rate = arrival
      s.tasks.push_back({m, 1, arrival, 30.0, {8.0}, {8.0}, {}});
    }
    s.jitter = {1.0, 1.0};
    s.capacity_fraction = s.capacity_est = {1.0};
    NetworkState st = NetworkState::initial(2, 1, 1);
    return apply_decision(st, s, {{{0, 0, 0}, {1, 0, 0}}}, t, kModel);
  };

  SUBCASE("second task arrives after the first finished") {
    const SlotResult r = two_tasks(5.0, 8.0, 1.0);
    CHECK(r.outcomes[0].arrival_ms == 5.0);
    CHECK(r.outcomes[1].arrival_ms == 8.0);
    CHECK(r.outcomes[1].t_wait == 0.0);
  }
  SUBCASE("second task queues behind the first") {
    const SlotResult r = two_tasks(5.0, 5.5, 2.0);
    CHECK(r.outcomes[0].t_wait == 0.0);
    CHECK(r.outcomes[1].t_wait == 1.5);
  }
  SUBCASE("tasks are queued by arrival, not by device index") {
    const SlotResult r = two_tasks(5.5, 5.0, 2.0);
    CHECK(r.outcomes[1].t_wait == 0.0);
    CHECK(r.outcomes[0].t_wait == 1.5);
  }
  SUBCASE("equal arrivals queue by device index") {
    const SlotResult r = two_tasks(5.0, 5.0, 2.0);
    CHECK(r.outcomes[0].t_wait == 0.0);
    CHECK(r.outcomes[1].t_wait == 2.0);
  }
}

TEST_CASE("slot reward") {
  SlotOutcome o;
  o.accuracy = 0.935;
  o.reward = 0.935 * psi(10.0, 30.0);
  CHECK(o.reward == doctest::Approx(0.2971).epsilon(1e-3));
  CHECK(slot_reward(std::vector<SlotOutcome>{}) == 0.0);
  CHECK(slot_reward(std::vector<SlotOutcome>{o, o}) == 2.0 * o.reward);
}

TEST_CASE("malformed decisions are rejected") {
  Rng rng(3, Stream::device);
  const SlotInput s = test::random_slot(rng, 2, 2);
  NetworkState st = NetworkState::initial(2, 2, 2);
  CHECK_THROWS_AS(apply_decision(st, s, {{{0, 0, 0}}}, kExits, kModel), ConstraintViolation);
  CHECK_THROWS_AS(apply_decision(st, s, {{{0, 0, 0}, {0, 1, 0}}}, kExits, kModel), ConstraintViolation);
  CHECK_THROWS_AS(apply_decision(st, s, {{{0, 0, 0}, {5, 1, 0}}}, kExits, kModel), ConstraintViolation);
  CHECK_THROWS_AS(apply_decision(st, s, {{{0, 2, 0}, {1, 1, 0}}}, kExits, kModel), ConstraintViolation);
  CHECK_THROWS_AS(apply_decision(st, s, {{{0, 0, 5}, {1, 1, 0}}}, kExits, kModel), ConstraintViolation);
  SlotInput cut = s;
  cut.tasks[1].linked = {true, false};
  CHECK_THROWS_AS(apply_decision(st, cut, {{{0, 0, 0}, {1, 1, 0}}}, kExits, kModel), ConstraintViolation);
  // nothing was committed by the failed attempts
  CHECK(st.servers[0].free_at_ms == 0.0);
  CHECK(st.devices[0].last_arrival_ms == 0.0);
}

TEST_CASE("server queue matches the pairwise waiting-time definition") {
  Rng rng(2024, Stream::device);
  for (int instance = 0; instance < 1000; ++instance) {
    const test::QueueInstance q = test::random_queue_instance(rng, 30.0);
    NetworkState st = q.state;
    const SlotResult r = apply_decision(st, q.slot, q.decision, kExits, kModel);
    const test::PairwiseWaits ref = test::pairwise_waits(q.state, q.slot, q.decision, kExits, 30.0);
    const int devices = static_cast<int>(q.slot.tasks.size());
    for (int m = 0; m < devices; ++m) {
      CHECK(r.outcomes[m].arrival_ms == ref.arrival[m]);
      CHECK(r.outcomes[m].t_wait == ref.wait[m]);
      CHECK(r.outcomes[m].t_total == r.outcomes[m].t_com + r.outcomes[m].t_wait + r.outcomes[m].t_cmp);
      CHECK(r.outcomes[m].success == (r.outcomes[m].t_total <= r.outcomes[m].deadline_ms));
    }
    CHECK(r.reward <= devices * kExits.max_accuracy() * psi(0.0, 30.0));
  }
}

TEST_CASE("evaluation is deterministic and does not touch the state") {
  Rng rng(5, Stream::device);
  const SlotInput s = test::random_slot(rng, 4, 2, 3);
  const NetworkState st = test::random_state(rng, 4, 2, 3, 30.0);
  const OffloadingDecision d = test::uniform_decision(s, 1, 2);
  const double a = evaluate_decision(st, s, d, kExits, kModel, View::actual);
  const double b = evaluate_decision(st, s, d, kExits, kModel, View::actual);
  CHECK(a == b);
  NetworkState c1 = st, c2 = st;
  const SlotResult r1 = apply_decision(c1, s, d, kExits, kModel);
  const SlotResult r2 = apply_decision(c2, s, d, kExits, kModel);
  CHECK(r1.reward == a);
  CHECK(r1.reward == r2.reward);
  for (int n = 0; n < 2; ++n) CHECK(c1.servers[n].free_at_ms == c2.servers[n].free_at_ms);
}

TEST_CASE("estimated view uses policy-side rates and ignores jitter") {
  Rng rng(6, Stream::device);
  SlotInput s = test::random_slot(rng, 1, 1);
  s.tasks[0].true_rate_mbps[0] = 50.0;
  s.tasks[0].est_rate_mbps[0] = 100.0;
  s.jitter[0] = 1.2;
  const NetworkState st = NetworkState::initial(1, 1, 2);
  const SlotEvaluator est(st, s, kExits, kModel, View::estimated);
  const SlotEvaluator act(st, s, kExits, kModel, View::actual);
  const std::vector<int> choice{4};
  const SlotResult e = est.evaluate(choice), a = act.evaluate(choice);
  CHECK(a.outcomes[0].t_com == 2.0 * e.outcomes[0].t_com);
  CHECK(e.outcomes[0].t_cmp == 1.26);
  CHECK(a.outcomes[0].t_cmp == doctest::Approx(1.26 * 1.2).epsilon(1e-15));
  CHECK(est.reward(choice) == e.reward);
}
