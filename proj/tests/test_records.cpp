#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "racket/records.hpp"
#include "racket/simulator.hpp"

using namespace racket;

namespace {

SlowSnapshot sample_slow() {
    SlowSnapshot s;
    s.install_id = "1000000042";
    s.participant_id = "100042";
    s.android_id = "0123456789abcdef";
    s.timestamp = 1600000123;
    s.registered_accounts = {{"a@gmail.com", "com.google"}, {"b@corp.example", "com.exchange"}};
    s.save_mode = true;
    s.stopped_apps = {"促销.app", "sys.app0001"};
    return s;
}

FastSnapshot sample_fast() {
    FastSnapshot f;
    f.install_id = "1000000042";
    f.participant_id = "100042";
    f.timestamp = 1600000125;
    f.foreground_app = "personal.app0007";
    f.screen_on = true;
    f.battery_level = 73;
    InstallDelta d;
    d.app_id = "promo.app0003";
    d.kind = InstallEventKind::installed;
    d.install_time = 1600000100;
    d.last_update_time = 1600000100;
    d.permissions = {{"android.permission.CAMERA", PermissionLevel::dangerous, true},
                     {"android.permission.INTERNET", PermissionLevel::normal, true}};
    d.apk_hash = "deadbeef00112233";
    InstallDelta u;
    u.app_id = "personal.app0001";
    u.kind = InstallEventKind::uninstalled;
    u.last_update_time = 1599990000;
    f.install_events = {d, u};
    return f;
}

}  // namespace

TEST_CASE("slow snapshot round-trips through its canonical line") {
    auto s = sample_slow();
    auto line = serialize(s);
    CHECK(line.find('\n') == std::string::npos);
    auto back = parse_snapshot(line);
    REQUIRE(std::holds_alternative<SlowSnapshot>(back));
    CHECK(std::get<SlowSnapshot>(back) == s);
    CHECK(serialize(back) == line);

    s.android_id.reset();
    auto line2 = serialize(s);
    auto back2 = std::get<SlowSnapshot>(parse_snapshot(line2));
    CHECK(!back2.android_id.has_value());
    CHECK(back2 == s);
}

TEST_CASE("fast snapshot round-trips including install deltas") {
    auto f = sample_fast();
    auto line = serialize(f);
    auto back = parse_snapshot(line);
    REQUIRE(std::holds_alternative<FastSnapshot>(back));
    CHECK(std::get<FastSnapshot>(back) == f);
    CHECK(serialize(back) == line);
}

TEST_CASE("review and app metadata round-trip") {
    ReviewRecord r{"promo.app0003", "a@gmail.com", 5, 1600001000};
    CHECK(parse_review(serialize(r)) == r);

    AppMetadata m{"personal.app0001", 2, false, 31337};
    auto back = parse_app_metadata(serialize(m));
    CHECK(back == m);
    CHECK(back.play_reviews == 31337);
}

TEST_CASE("record parser dispatches on kind") {
    auto slow_line = serialize(sample_slow());
    auto fast_line = serialize(sample_fast());
    CHECK(std::holds_alternative<SlowSnapshot>(parse_record(slow_line)));
    CHECK(std::holds_alternative<FastSnapshot>(parse_record(fast_line)));
    CHECK_THROWS_AS(parse_record("{\"kind\":\"bogus\"}"), ParseError);
    CHECK_THROWS_AS(parse_record("not json"), ParseError);
    CHECK_THROWS_AS(parse_record(""), ParseError);
}

TEST_CASE("field invariants are enforced") {
    auto f = sample_fast();
    f.battery_level = 101;
    CHECK_THROWS_AS(validate(f), ParseError);
    f = sample_fast();
    f.battery_level = -1;
    CHECK_THROWS_AS(validate(f), ParseError);

    f = sample_fast();
    f.install_events[0].install_time.reset();  // installed requires install_time
    CHECK_THROWS_AS(validate(f), ParseError);
    f = sample_fast();
    f.install_events[1].install_time = 1;  // uninstalled forbids it
    CHECK_THROWS_AS(validate(f), ParseError);

    auto s = sample_slow();
    s.install_id = "123";  // must be 10 digits
    CHECK_THROWS_AS(validate(s), ParseError);
    s = sample_slow();
    s.participant_id = "12a042";
    CHECK_THROWS_AS(validate(s), ParseError);
    s = sample_slow();
    s.timestamp = 0;
    CHECK_THROWS_AS(validate(s), ParseError);
    s = sample_slow();
    s.registered_accounts.push_back(s.registered_accounts[0]);  // duplicate pair
    CHECK_THROWS_AS(validate(s), ParseError);

    ReviewRecord r{"a", "b", 6, 10};
    CHECK_THROWS_AS(validate(r), ParseError);
    r.rating = 0;
    CHECK_THROWS_AS(validate(r), ParseError);

    AppMetadata m{"a", -1, false, 0};
    CHECK_THROWS_AS(validate(m), ParseError);
    m = {"a", 0, false, -5};
    CHECK_THROWS_AS(validate(m), ParseError);
}

TEST_CASE("parse errors name the offending field") {
    auto f = sample_fast();
    f.battery_level = 250;
    try {
        validate(f);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "battery");
    }
}

TEST_CASE("every simulated record round-trips byte-identically") {
    FleetConfig cfg;
    cfg.workers = 6;
    cfg.regulars = 4;
    cfg.duration_days = 2;
    cfg.seed = 1234;
    cfg.screen_scale = 0.2;
    MemorySink sink;
    generate_fleet(cfg, sink);
    REQUIRE(sink.snapshots.size() > 1000);

    std::mt19937_64 rng(5);
    size_t checked = 0;
    for (size_t i = 0; i < sink.snapshots.size(); i += 1 + rng() % 37) {
        const auto& r = sink.snapshots[i];
        auto line = serialize(r);
        CHECK(serialize(parse_snapshot(line)) == line);
        ++checked;
    }
    CHECK(checked > 50);
    for (const auto& r : sink.reviews) {
        validate(r);
        CHECK(parse_review(serialize(r)) == r);
    }
    for (const auto& m : sink.apps) CHECK(parse_app_metadata(serialize(m)) == m);
}
