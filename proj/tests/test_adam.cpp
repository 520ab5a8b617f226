#include <cmath>
#include <random>

#include "doctest.h"
#include "laketemp/adam.hpp"
#include "laketemp/errors.hpp"
#include "laketemp/tensor.hpp"

using namespace laketemp;

namespace {

std::vector<std::pair<std::string, Tensor>> one_param(double value) {
    return {{"w", Tensor::scalar(value, true)}};
}

void set_grad(Tensor& t, double g) {
    // drive a gradient through a linear graph: loss = g * t
    t.zero_grad();
    Tensor loss = t * g;
    loss.backward();
}

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged, step increments") {
    auto params = one_param(1.25);
    AdamState st = AdamState::init(params);
    set_grad(params[0].second, 0.0);
    adam_step(params, st, 0.005);
    CHECK(params[0].second.item() == 1.25);
    CHECK(st.step_count() == 1);
    // still the identity after more zero-gradient steps
    for (int i = 0; i < 5; ++i) {
        set_grad(params[0].second, 0.0);
        adam_step(params, st, 0.005);
    }
    CHECK(params[0].second.item() == 1.25);
    // identity also holds for any state whose first moments are zero
    // (a nonzero first moment keeps decaying by design, so it must move)
    AdamState skewed = AdamState::restore({}, 7, {{0.0}}, {{0.25}});
    auto p2 = one_param(-3.5);
    set_grad(p2[0].second, 0.0);
    adam_step(p2, skewed, 0.005);
    CHECK(p2[0].second.item() == -3.5);
}

TEST_CASE("first step with unit gradient moves by ~lr") {
    // hand evaluation of the recurrence, t=1:
    //   m=0.1, v=0.001, mhat=1, vhat=1 -> x = -lr/(1+eps)
    auto params = one_param(0.0);
    AdamState st = AdamState::init(params);
    set_grad(params[0].second, 1.0);
    adam_step(params, st, 0.005);
    CHECK(params[0].second.item() == doctest::Approx(-0.004999999950000001).epsilon(1e-12));
}

TEST_CASE("two consecutive steps with constant gradient match hand recurrence") {
    auto params = one_param(0.0);
    AdamState st = AdamState::init(params);
    set_grad(params[0].second, 1.0);
    adam_step(params, st, 0.005);
    set_grad(params[0].second, 1.0);
    adam_step(params, st, 0.005);
    CHECK(params[0].second.item() == doctest::Approx(-0.009999999899999966).epsilon(1e-12));
    CHECK(st.step_count() == 2);
}

TEST_CASE("shape mismatch between state and parameter is rejected") {
    auto params = one_param(0.0);
    AdamState st = AdamState::init(params);
    auto other = std::vector<std::pair<std::string, Tensor>>{
        {"w", Tensor::zeros({3}, true)}};
    CHECK_THROWS_AS(adam_step(other, st, 0.005), NumericError);
}

TEST_CASE("non-finite gradient is rejected with the parameter named") {
    auto params = one_param(2.0);
    AdamState st = AdamState::init(params);
    set_grad(params[0].second, 1.0);
    // poison the gradient through a divide-by-zero graph
    params[0].second.zero_grad();
    Tensor z = Tensor::scalar(0.0);
    Tensor loss = divide(params[0].second, z);
    loss.backward();
    try {
        adam_step(params, st, 0.005);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
}

TEST_CASE("adam converges on a quadratic bowl") {
    auto params = one_param(3.0);
    AdamState st = AdamState::init(params);
    for (int i = 0; i < 4000; ++i) {
        auto& w = params[0].second;
        w.zero_grad();
        Tensor loss = mul(w, w);
        loss.backward();
        adam_step(params, st, 0.01);
    }
    CHECK(std::abs(params[0].second.item()) < 1e-3);
}
