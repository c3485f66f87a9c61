#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <avamp/vamp.hpp>
#include <avamp/rng.hpp>

#include <cmath>

using namespace avamp;

namespace {

ProblemInstance make_instance(int m, int n, double kappa, std::uint64_t seed,
                              double snr_db = 35.0) {
    InstanceConfig cfg;
    cfg.m = m;
    cfg.n = n;
    cfg.kappa = kappa;
    cfg.snr_db = snr_db;
    cfg.theta1 = BgParams{0.15, 0.0, 1.0};
    Rng rng(seed);
    return synthesize_instance(cfg, rng);
}

VampConfig oracle_config(int iters) {
    VampConfig cfg;
    cfg.n_iters = iters;
    cfg.theta1_rule.kind = AdaptationRule::Kind::Oracle;
    cfg.theta2_mode = Theta2Mode::Oracle;
    return cfg;
}

} // namespace

TEST_CASE("oracle run matches a dense-matrix reference") {
    const int m = 32, n = 64, iters = 5;
    const ProblemInstance inst = make_instance(m, n, 5.0, 51);
    const VampConfig cfg = oracle_config(iters);
    const RunResult rr = run(inst, cfg);
    REQUIRE(!rr.failed);

    // independent re-derivation with explicit matrices
    const Eigen::MatrixXd a = inst.op.dense();
    const double th2 = inst.theta2_true;
    Eigen::VectorXd r1 = Eigen::VectorXd::Zero(n);
    double gamma1 = VampConfig::kGamma10Rel / inst.theta1_true.second_moment();
    Eigen::VectorXd xhat1(n), r1_ref;
    double gamma1_ref = 0;
    for (int k = 0; k < iters; ++k) {
        double pv = 0.0;
        for (int i = 0; i < n; ++i) {
            const kernels::BgMoments c = kernels::bg_component(r1(i), gamma1, inst.theta1_true);
            xhat1(i) = c.pi * c.m;
            pv += kernels::bg_posterior_variance(c);
        }
        const double deriv = gamma1 * pv / n;
        const double eta1 = gamma1 / deriv;
        const double gamma2 = eta1 - gamma1;
        const Eigen::VectorXd r2 = (eta1 * xhat1 - gamma1 * r1) / gamma2;

        const Eigen::MatrixXd q =
            th2 * a.transpose() * a + gamma2 * Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd qinv = q.inverse();
        const Eigen::VectorXd xhat2 = qinv * (th2 * a.transpose() * inst.y + gamma2 * r2);
        const double eta2 = n / qinv.trace();
        gamma1_ref = eta2 - gamma2;
        r1_ref = (eta2 * xhat2 - gamma2 * r2) / gamma1_ref;
        r1 = r1_ref;
        gamma1 = gamma1_ref;

        CHECK(rr.trace[k].gamma2 == doctest::Approx(gamma2).epsilon(1e-8));
        CHECK(rr.trace[k].eta2 == doctest::Approx(eta2).epsilon(1e-8));
    }
    CHECK(rr.final_state.gamma1 == doctest::Approx(gamma1_ref).epsilon(1e-8));
    CHECK((rr.final_state.r1 - r1_ref).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("message bookkeeping invariants hold") {
    const ProblemInstance inst = make_instance(48, 96, 10.0, 52);
    const VampConfig cfg = oracle_config(1);
    VampState st = init_state(inst, cfg);
    const Eigen::VectorXd uty = inst.op.ut(inst.y);
    const Eigen::VectorXd r1_in = st.r1;
    const double gamma1_in = st.gamma1;
    const TraceRecord rec = step(st, inst, cfg, uty);
    REQUIRE(!rec.failed);
    CHECK(st.gamma2 == doctest::Approx(st.eta1 - gamma1_in).epsilon(1e-12));
    const Eigen::VectorXd lhs = st.eta1 * st.xhat1;
    const Eigen::VectorXd rhs = st.gamma2 * st.r2 + gamma1_in * r1_in;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(st.gamma1 == doctest::Approx(st.eta2 - st.gamma2).epsilon(1e-12));
    const Eigen::VectorXd lhs2 = st.eta2 * st.xhat2;
    const Eigen::VectorXd rhs2 = st.gamma1 * st.r1 + st.gamma2 * st.r2;
    CHECK((lhs2 - rhs2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("oracle VAMP converges on a well-conditioned instance") {
    const ProblemInstance inst = make_instance(128, 256, 2.0, 53, 40.0);
    const RunResult rr = run(inst, oracle_config(20));
    REQUIRE(!rr.failed);
    CHECK(rr.trace.back().nmse1_db < -25.0);
    CHECK(rr.trace.back().nmse1_db < rr.trace.front().nmse1_db);
}

TEST_CASE("adaptive modes track the oracle") {
    const ProblemInstance inst = make_instance(128, 256, 10.0, 54, 40.0);
    const RunResult oracle = run(inst, oracle_config(30));

    VampConfig em = oracle_config(30);
    em.theta1_rule.kind = AdaptationRule::Kind::EmClosedForm;
    em.theta2_mode = Theta2Mode::EmLine18;
    const RunResult em_rr = run(inst, em);
    REQUIRE(!em_rr.failed);
    CHECK(em_rr.trace.back().nmse1_db < -20.0);
    // prior parameters learned from data approach the truth
    CHECK(em_rr.trace.back().theta1_hat.beta ==
          doctest::Approx(inst.theta1_true.beta).epsilon(0.35));
    CHECK(em_rr.trace.back().theta2_hat > 0.0);

    VampConfig at = oracle_config(30);
    at.theta1_rule.kind = AdaptationRule::Kind::AutoTune;
    at.theta2_mode = Theta2Mode::MlBinned;
    const RunResult at_rr = run(inst, at);
    REQUIRE(!at_rr.failed);
    CHECK(at_rr.trace.back().nmse1_db < -20.0);
    CHECK(std::fabs(at_rr.trace.back().nmse1_db - oracle.trace.back().nmse1_db) < 3.0);
}

TEST_CASE("finite grid mode selects a candidate") {
    const ProblemInstance inst = make_instance(64, 128, 5.0, 55);
    VampConfig cfg = oracle_config(10);
    cfg.theta1_rule.kind = AdaptationRule::Kind::FiniteGrid;
    // truth first: the grid starts there and must not wander off
    cfg.theta1_rule.candidates = {inst.theta1_true, BgParams{0.5, 0.0, 0.3},
                                  BgParams{0.05, 0.0, 3.0}};
    const RunResult rr = run(inst, cfg);
    REQUIRE(!rr.failed);
    CHECK(rr.trace.back().theta1_hat.beta == inst.theta1_true.beta);
    CHECK(rr.trace.back().nmse1_db < -15.0);

    // cold start from a wrong candidate still settles on a list member
    VampConfig cold = cfg;
    cold.theta1_rule.candidates = {BgParams{0.5, 0.0, 0.3}, inst.theta1_true};
    const RunResult rc = run(inst, cold);
    REQUIRE(!rc.failed);
    bool in_list = false;
    for (const BgParams& c : cold.theta1_rule.candidates)
        in_list = in_list || (rc.trace.back().theta1_hat.beta == c.beta &&
                              rc.trace.back().theta1_hat.tau == c.tau);
    CHECK(in_list);
}

TEST_CASE("damping keeps the undamped fixed point") {
    const ProblemInstance inst = make_instance(96, 192, 20.0, 56, 40.0);
    VampConfig damped = oracle_config(100);
    damped.damping_rho = 0.5;
    const RunResult d = run(inst, damped);
    const RunResult u = run(inst, oracle_config(100));
    REQUIRE(!d.failed);
    REQUIRE(!u.failed);
    CHECK(std::fabs(d.trace.back().nmse1_db - u.trace.back().nmse1_db) < 0.5);
}

TEST_CASE("runs are deterministic") {
    const ProblemInstance inst = make_instance(64, 128, 10.0, 57);
    VampConfig cfg = oracle_config(8);
    cfg.theta1_rule.kind = AdaptationRule::Kind::EmClosedForm;
    cfg.theta2_mode = Theta2Mode::EmLine18;
    const RunResult a = run(inst, cfg);
    const RunResult b = run(inst, cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
        CHECK(a.trace[k].nmse1_db == b.trace[k].nmse1_db);
        CHECK(a.trace[k].gamma1 == b.trace[k].gamma1);
        CHECK(a.trace[k].theta2_hat == b.trace[k].theta2_hat);
    }
    CHECK((a.final_state.r1 - b.final_state.r1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nmse_db guards and config validation") {
    CHECK_THROWS(nmse_db(Eigen::VectorXd::Ones(4), Eigen::VectorXd::Zero(4)));
    CHECK(nmse_db(Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4)) == -320.0);
    VampConfig cfg;
    cfg.n_iters = 0;
    CHECK_THROWS(cfg.validate());
    cfg = VampConfig{};
    cfg.damping_rho = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = VampConfig{};
    cfg.theta1_rule.kind = AdaptationRule::Kind::FiniteGrid;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("se-input recording fills q2 and p2") {
    const ProblemInstance inst = make_instance(64, 128, 5.0, 58);
    VampConfig cfg = oracle_config(3);
    cfg.record_se_inputs = true;
    const RunResult rr = run(inst, cfg);
    REQUIRE(!rr.failed);
    // iteration 0 enters with r1 = 0, so p2 is the signal energy
    CHECK(rr.trace[0].p2_mean ==
          doctest::Approx(inst.x0.squaredNorm() / 128.0).epsilon(1e-12));
    for (const TraceRecord& t : rr.trace) CHECK(t.q2_mean > 0.0);
}
