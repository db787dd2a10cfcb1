#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nutty/anim_assets.hpp"
#include "nutty/error.hpp"

using namespace nutty;
using Catch::Matchers::WithinAbs;

namespace {

Keyframe key(double t, double v, TangentMode mode = TangentMode::Smooth) { return {t, v, mode, {}, {}}; }

Keyframe custom(double t, double v, double in, double out) { return {t, v, TangentMode::Custom, in, out}; }

// Hermite in Bernstein form, a different algebraic route from the library's
// basis functions.
double hermite_bernstein(double p0, double m0, double p1, double m1, double h, double s) {
    const double b0 = p0, b1 = p0 + m0 * h / 3, b2 = p1 - m1 * h / 3, b3 = p1;
    const double r = 1 - s;
    return r * r * r * b0 + 3 * r * r * s * b1 + 3 * r * s * s * b2 + s * s * s * b3;
}

// Tangent rules restated for the oracle.
std::pair<double, double> oracle_tangents(const std::vector<Keyframe>& k, std::size_t i) {
    const bool first = i == 0, last = i + 1 == k.size();
    auto chord = [&](std::size_t a, std::size_t b) { return (k[b].value - k[a].value) / (k[b].time - k[a].time); };
    switch (k[i].mode) {
        case TangentMode::Custom: return {*k[i].in_tangent, *k[i].out_tangent};
        case TangentMode::Linear:
            if (first && last) return {0, 0};
            return {first ? chord(0, 1) : chord(i - 1, i), last ? chord(i - 1, i) : chord(i, i + 1)};
        case TangentMode::Smooth:
            if (first || last) return {0, 0};
            return {chord(i - 1, i + 1), chord(i - 1, i + 1)};
    }
    return {0, 0};
}

double oracle_sample(const std::vector<Keyframe>& k, double t) {
    if (t <= k.front().time) return k.front().value;
    if (t >= k.back().time) return k.back().value;
    std::size_t i = 0;
    while (k[i + 1].time <= t) ++i;
    const double h = k[i + 1].time - k[i].time;
    return hermite_bernstein(k[i].value, oracle_tangents(k, i).second, k[i + 1].value, oracle_tangents(k, i + 1).first,
                             h, (t - k[i].time) / h);
}

Curve random_curve(std::mt19937_64& rng, bool linear_only) {
    std::uniform_real_distribution<double> u(0, 1);
    Curve c{"joint", {}};
    const int n = 2 + static_cast<int>(6 * u(rng));
    double t = 2 * u(rng);
    for (int i = 0; i < n; ++i) {
        const double v = (u(rng) - 0.5) * 100;
        const double r = u(rng);
        if (linear_only || r < 0.33) {
            c.keys.push_back(key(t, v, TangentMode::Linear));
        } else if (r < 0.66) {
            c.keys.push_back(key(t, v, TangentMode::Smooth));
        } else {
            c.keys.push_back(custom(t, v, (u(rng) - 0.5) * 300, (u(rng) - 0.5) * 300));
        }
        t += 0.05 + u(rng);
    }
    return c;
}

}  // namespace

TEST_CASE("linear and smooth two-key examples", "[anim][curve]") {
    Curve linear{"j", {key(0, 0, TangentMode::Linear), key(1, 90, TangentMode::Linear)}};
    CHECK_THAT(sample_curve(linear, 0.5), WithinAbs(45, 1e-12));
    Curve smooth{"j", {key(0, 0), key(1, 90)}};
    CHECK_THAT(sample_curve(smooth, 0.5), WithinAbs(45, 1e-12));
    const double h = 1e-7;
    CHECK(std::abs((sample_curve(smooth, h) - sample_curve(smooth, 0)) / h) < 1e-6 * 90 * 10);
    CHECK(std::abs((sample_curve(smooth, 1) - sample_curve(smooth, 1 - h)) / h) < 1e-6 * 90 * 10);
    // The analytic slope at the ends is exactly zero.
    const auto [in0, out0] = key_tangents(smooth, 0);
    CHECK(out0 == 0);
    CHECK(key_tangents(smooth, 1).first == 0);
}

TEST_CASE("anticipation dip from a custom tangent", "[anim][curve]") {
    Curve c{"j", {custom(0, 0, 0, -120), custom(1, 90, 0, 0)}};
    double lowest = 0, at = 0;
    for (int i = 0; i <= 10000; ++i) {
        const double t = i * 1e-4;
        const double v = sample_curve(c, t);
        if (v < lowest) lowest = v, at = t;
    }
    CHECK(lowest < 0);
    // p(s) = -300 s^3 + 510 s^2 - 120 s has its minimum at s = 2/15.
    const double s = 2.0 / 15;
    CHECK_THAT(lowest, WithinAbs(-300 * s * s * s + 510 * s * s - 120 * s, 1e-6));
    CHECK_THAT(at, WithinAbs(s, 1e-4));
}

TEST_CASE("curves match the dense oracle", "[anim][curve][oracle]") {
    std::mt19937_64 rng(31);
    for (int n = 0; n < 30; ++n) {
        const Curve c = random_curve(rng, false);
        const double t0 = c.keys.front().time - 0.5, t1 = c.keys.back().time + 0.5;
        for (double t = t0; t <= t1; t += 1e-3) {
            REQUIRE_THAT(sample_curve(c, t), WithinAbs(oracle_sample(c.keys, t), 1e-9));
        }
        for (const auto& k : c.keys) CHECK_THAT(sample_curve(c, k.time), WithinAbs(k.value, 1e-12));
    }
}

TEST_CASE("linear curves equal closed-form interpolation", "[anim][curve][oracle]") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0, 1);
    for (int n = 0; n < 100; ++n) {
        const double t0 = u(rng), t1 = t0 + 0.1 + u(rng), v0 = 100 * u(rng) - 50, v1 = 100 * u(rng) - 50;
        Curve c{"j", {key(t0, v0, TangentMode::Linear), key(t1, v1, TangentMode::Linear)}};
        for (int i = 0; i <= 200; ++i) {
            const double t = t0 + (t1 - t0) * i / 200.0;
            REQUIRE_THAT(sample_curve(c, t), WithinAbs(v0 + (v1 - v0) * (t - t0) / (t1 - t0), 1e-12));
        }
    }
}

TEST_CASE("curves are continuous", "[anim][curve][property]") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0, 1);
    for (int n = 0; n < 50; ++n) {
        const Curve c = random_curve(rng, false);
        // Slope bound from the tangents and chords of the curve.
        double bound = 0;
        for (std::size_t i = 0; i < c.keys.size(); ++i) {
            const auto [in, out] = key_tangents(c, i);
            bound = std::max({bound, std::abs(in), std::abs(out)});
            if (i > 0)
                bound = std::max(bound, std::abs(c.keys[i].value - c.keys[i - 1].value) /
                                            (c.keys[i].time - c.keys[i - 1].time));
        }
        const double h = 1e-6;
        for (int i = 0; i < 200; ++i) {
            const double t = c.keys.front().time + u(rng) * (c.keys.back().time - c.keys.front().time);
            CHECK(std::abs(sample_curve(c, t + h) - sample_curve(c, t)) <= 3 * bound * h + 1e-12);
        }
    }
}

TEST_CASE("clip sampling", "[anim][clip]") {
    AnimationClip clip;
    clip.name = "c";
    clip.duration = 2;
    clip.curves = {{"a", {key(0, 1), key(2, 3)}}, {"b", {key(0, -1), key(1, 4)}}};
    const auto start = sample_clip(clip, 0);
    CHECK(start.size() == 2);
    CHECK(start.position("a") == 1.0);
    CHECK(start.position("b") == -1.0);
    const auto late = sample_clip(clip, 5);
    CHECK(late.position("a") == 3.0);
    CHECK(late.position("b") == 4.0);

    clip.curves.resize(1);
    clip.tracks = {{"face", {{0.0, "calm"}, {1.0, "smile"}}}};
    const auto mid = sample_clip(clip, 0.5);
    CHECK(mid.label("face") == "calm");
    CHECK(sample_clip(clip, 1.0).label("face") == "smile");
    clip.tracks[0].events[0].time = 0.2;
    CHECK_FALSE(sample_clip(clip, 0.1).contains("face"));
}

TEST_CASE("identity time warp", "[anim][warp]") {
    AnimationClip clip{"c", 4, {{"j", {key(0, 0), key(1, 5), key(4, 0)}}}, {}, {{"hit", 1.0}}};
    CHECK(time_warp(clip, {{"hit", 1.0}}) == clip);
    CHECK(time_warp(clip, {}) == clip);
}

TEST_CASE("single anchor warp matches the remap oracle", "[anim][warp][oracle]") {
    AnimationClip clip{"c",
                       4,
                       {{"j", {key(0, 0), key(0.5, 3), key(1, 5), key(2.5, -2, TangentMode::Linear), key(4, 0)}}},
                       {{"face", {{0.25, "a"}, {3.0, "b"}}}},
                       {{"hit", 1.0}}};
    const auto warped = time_warp(clip, {{"hit", 2.0}});
    // Independent inverse of the piecewise-linear map (0,0) (1,2) (4,4).
    auto back = [](double t) { return t <= 2 ? t / 2 : 1 + (t - 2) * 1.5; };
    auto forward = [](double t) { return t <= 1 ? 2 * t : 2 + (t - 1) * (2.0 / 3); };

    for (std::size_t i = 0; i < clip.curves[0].keys.size(); ++i) {
        CHECK_THAT(warped.curves[0].keys[i].time, WithinAbs(forward(clip.curves[0].keys[i].time), 1e-12));
        CHECK(warped.curves[0].keys[i].value == clip.curves[0].keys[i].value);
    }
    CHECK(warped.anchors[0].time == 2.0);
    CHECK_THAT(warped.tracks[0].events[0].time, WithinAbs(0.5, 1e-12));
    CHECK_THAT(warped.tracks[0].events[1].time, WithinAbs(2 + 2.0 * 2 / 3, 1e-12));
    for (int i = 0; i <= 40000; ++i) {
        const double t = i * 1e-4;
        REQUIRE_THAT(sample_curve(warped.curves[0], t), WithinAbs(sample_curve(clip.curves[0], back(t)), 1e-9));
    }
}

TEST_CASE("warp errors", "[anim][warp]") {
    AnimationClip clip{"c", 4, {{"j", {key(0, 0), key(4, 1)}}}, {}, {{"a", 1.0}, {"b", 2.0}}};
    CHECK_THROWS_AS(time_warp(clip, {{"c", 1.0}}), ValidationError);
    CHECK_THROWS_AS(time_warp(clip, {{"a", 3.0}, {"b", 2.5}}), ValidationError);
    CHECK_THROWS_AS(time_warp(clip, {{"a", 5.0}}), ValidationError);
}

TEST_CASE("clip files round-trip and validate", "[anim][io]") {
    std::mt19937_64 rng(34);
    for (int i = 0; i < 20; ++i) {
        AnimationClip clip;
        clip.name = "clip" + std::to_string(i);
        clip.curves = {random_curve(rng, false)};
        clip.curves[0].dof = "j";
        clip.duration = clip.curves[0].keys.back().time;
        clip.tracks = {{"face", {{0.1, "a"}, {0.7, "b"}}}};
        clip.anchors = {{"mark", clip.duration / 3}};
        CHECK(load_clip(serialize(clip)) == clip);
    }
    CHECK_THROWS_AS(load_clip("[]"), ParseError);
    CHECK_THROWS_AS(load_clip(R"({"name":"x","duration":1,"curves":[{"dof":"j","keys":[{"t":1,"v":0},{"t":0,"v":1}]}]})"),
                    ValidationError);

    const auto spec = load_embodiment(
        R"({"name":"r","dofs":[{"name":"j","dimension":"stationary","range":[-1,1]},)"
        R"({"name":"face","dimension":"display","kind":"discrete","labels":["a","b"]}]})");
    AnimationClip good{"g", 1, {{"j", {key(0, 0), key(1, 0.5)}}}, {{"face", {{0, "a"}}}}, {}};
    CHECK_NOTHROW(validate(good, spec));
    AnimationClip bad_label = good;
    bad_label.tracks[0].events[0].label = "z";
    CHECK_THROWS_AS(validate(bad_label, spec), ValidationError);
    AnimationClip bad_dof = good;
    bad_dof.curves[0].dof = "face";
    CHECK_THROWS_AS(validate(bad_dof, spec), ValidationError);
}

TEST_CASE("clip library shares clips", "[anim][library]") {
    ClipLibrary lib;
    lib.add(AnimationClip{"wave", 1, {{"j", {key(0, 0)}}}, {}, {}});
    CHECK(lib.size() == 1);
    CHECK(lib.find("wave") != nullptr);
    CHECK(lib.find("nod") == nullptr);
    const auto shared = lib.share("wave");
    CHECK(shared.get() == lib.find("wave"));
}
