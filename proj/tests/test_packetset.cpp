#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "uavguard/error.hpp"
#include "uavguard/packetset.hpp"

using namespace uavguard;
using namespace uavguard::packetset;

namespace {

PacketRecord random_packet(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> port(0, 65535);
    std::uniform_int_distribution<std::uint32_t> u32;
    std::uniform_int_distribution<std::uint32_t> len(0, 1500);
    std::bernoulli_distribution coin(0.4);
    PacketRecord p;
    p.sport = static_cast<std::uint16_t>(port(rng));
    p.dport = static_cast<std::uint16_t>(port(rng));
    std::string flags;
    for (char c : kFlagAlphabet) {
        if (coin(rng)) flags.push_back(c);
    }
    p.flags = flags;
    p.seq = u32(rng);
    p.ack = u32(rng);
    p.length = len(rng);
    return p;
}

Triple random_triple(std::mt19937_64& rng, std::size_t n) {
    Triple t;
    for (std::size_t i = 0; i < n; ++i) t.context.push_back(random_packet(rng));
    t.prompt = random_packet(rng);
    t.next = random_packet(rng);
    return t;
}

PacketEvent ev(double ts, std::string src, std::uint16_t sport, std::string dst, std::uint16_t dport,
               std::string flags = "A", std::uint32_t length = 10) {
    PacketEvent e;
    e.timestamp = ts;
    e.src = std::move(src);
    e.dst = std::move(dst);
    e.packet.sport = sport;
    e.packet.dport = dport;
    e.packet.flags = std::move(flags);
    e.packet.length = length;
    return e;
}

Session session_of_length(std::size_t len) {
    Session s;
    for (std::size_t i = 0; i < len; ++i) {
        auto e = ev(static_cast<double>(i), "a", 1, "b", 2);
        e.packet.seq = static_cast<std::uint32_t>(i);
        s.packets.push_back(e);
    }
    return s;
}

} // namespace

TEST_CASE("flags are validated and canonicalized") {
    CHECK(canonical_flags("AS") == "SA");
    CHECK(canonical_flags("") == "");
    CHECK(canonical_flags("CEUAPRSF") == "FSRPAUEC");
    CHECK_THROWS_AS(canonical_flags("SS"), ParseError);
    CHECK_THROWS_AS(canonical_flags("X"), ParseError);
}

TEST_CASE("packet log parsing") {
    std::istringstream good("timestamp,src,dst,sport,dport,flags,seq,ack,length\n"
                            "0.5,10.0.0.1,10.0.0.2,14550,14555,SA,1,2,0\n"
                            "0.6,10.0.0.2,10.0.0.1,14555,14550,,3,4,60\n");
    const auto events = parse_packet_log(good);
    REQUIRE(events.size() == 2);
    CHECK(events[0].packet.flags == "SA");
    CHECK(events[1].packet.flags.empty());
    CHECK(events[1].packet.length == 60);

    std::istringstream again(render_packet_log(events));
    const auto back = parse_packet_log(again);
    REQUIRE(back.size() == 2);
    CHECK(back[0].packet == events[0].packet);

    std::istringstream bad_port("timestamp,src,dst,sport,dport,flags,seq,ack,length\n"
                                "0.5,a,b,1,2,S,1,2,0\n"
                                "0.6,a,b,70000,2,S,1,2,0\n");
    try {
        parse_packet_log(bad_port);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).rfind("row 3:", 0) == 0);
    }

    std::istringstream jsonl(R"({"timestamp":1.0,"src":"a","dst":"b","sport":1,"dport":2,"flags":"A","seq":5,"ack":6,"length":0})"
                             "\n");
    const auto j = parse_packet_log(jsonl);
    REQUIRE(j.size() == 1);
    CHECK(j[0].packet.seq == 5);
}

TEST_CASE("session extraction") {
    SUBCASE("two interleaved endpoint pairs") {
        std::vector<PacketEvent> log = {
            ev(0.0, "a", 1000, "b", 80), ev(0.1, "c", 2000, "b", 80), ev(0.2, "b", 80, "a", 1000),
            ev(0.3, "b", 80, "c", 2000), ev(0.05, "a", 1000, "b", 80),
        };
        const auto sessions = extract_sessions(log);
        REQUIRE(sessions.size() == 2);
        // grouping oracle: every packet of a session shares the unordered endpoint pair
        for (const auto& s : sessions) {
            std::set<std::string> hosts;
            for (std::size_t i = 0; i < s.packets.size(); ++i) {
                hosts.insert(s.packets[i].src);
                hosts.insert(s.packets[i].dst);
                if (i > 0) CHECK(s.packets[i - 1].timestamp <= s.packets[i].timestamp);
            }
            CHECK(hosts.size() == 2);
        }
        CHECK(sessions[0].packets.size() == 3);
        CHECK(sessions[1].packets.size() == 2);
    }
    SUBCASE("single packet") {
        const auto sessions = extract_sessions({ev(1.0, "a", 1, "b", 2)});
        REQUIRE(sessions.size() == 1);
        CHECK(sessions[0].packets.size() == 1);
    }
    SUBCASE("idle gap splits") {
        const auto sessions = extract_sessions({ev(0.0, "a", 1, "b", 2), ev(120.0, "a", 1, "b", 2)});
        CHECK(sessions.size() == 2);
        const auto merged = extract_sessions({ev(0.0, "a", 1, "b", 2), ev(120.0, "a", 1, "b", 2)}, {.idle_timeout_s = 200});
        CHECK(merged.size() == 1);
    }
    SUBCASE("FIN from both sides closes; trailing ACK stays; new SYN starts over") {
        const auto sessions = extract_sessions({
            ev(0.0, "a", 1, "b", 2, "S", 0), ev(0.1, "b", 2, "a", 1, "SA", 0), ev(0.2, "a", 1, "b", 2, "FA", 0),
            ev(0.3, "b", 2, "a", 1, "FA", 0), ev(0.4, "a", 1, "b", 2, "A", 0), ev(0.5, "a", 1, "b", 2, "S", 0),
        });
        REQUIRE(sessions.size() == 2);
        CHECK(sessions[0].packets.size() == 5);
        CHECK(sessions[1].packets.size() == 1);
    }
    SUBCASE("RST closes") {
        const auto sessions = extract_sessions(
            {ev(0.0, "a", 1, "b", 2, "S", 0), ev(0.1, "b", 2, "a", 1, "RA", 0), ev(0.2, "a", 1, "b", 2, "S", 0)});
        CHECK(sessions.size() == 2);
    }
    SUBCASE("UDP uses the idle timeout only") {
        const auto sessions = extract_sessions({ev(0.0, "a", 1, "b", 2, ""), ev(30.0, "b", 2, "a", 1, "")});
        CHECK(sessions.size() == 1);
    }
}

TEST_CASE("window count formula for lengths up to 100 and n up to 10") {
    for (std::size_t len = 0; len <= 100; ++len) {
        const auto s = session_of_length(len);
        for (std::size_t n = 0; n <= 10; ++n) {
            const auto triples = build_windows(s, n);
            const std::size_t expected = len > n + 1 ? len - n - 1 : 0;
            REQUIRE(triples.size() == expected);
            for (std::size_t k = 0; k < triples.size(); ++k) {
                const std::size_t i = n + k;
                REQUIRE(triples[k].prompt.seq == i);
                REQUIRE(triples[k].next.seq == i + 1);
                REQUIRE(triples[k].context.size() == n);
                for (std::size_t c = 0; c < n; ++c) REQUIRE(triples[k].context[c].seq == i - n + c);
            }
        }
    }
    const auto five = build_windows(session_of_length(5), 2);
    REQUIRE(five.size() == 2);
    CHECK(five[0].prompt.seq == 2);
    CHECK(five[1].prompt.seq == 3);
}

TEST_CASE("perturbations") {
    PacketRecord chosen{14550, 14555, "A", 100, 200, 60};
    Triple t{{}, chosen, chosen};
    const auto s = make_pair(t, Perturbation{Field::Sport, +1});
    PacketRecord expected = chosen;
    expected.sport = 14551;
    CHECK(s.rejected == expected);
    CHECK(s.chosen == chosen);
    CHECK(s.perturbed_field == Field::Sport);

    CHECK(apply_perturbation({65535, 0, "", 0, 0, 0}, {Field::Sport, 1}).sport == 0);
    CHECK(apply_perturbation({0, 0, "", 0, 0, 0}, {Field::Dport, -1}).dport == 65535);
    CHECK(apply_perturbation({0, 0, "", 0, 0, 0}, {Field::Seq, -1}).seq == 0xffffffffu);
    CHECK(apply_perturbation({0, 0, "", 0xffffffffu, 4, 0}, {Field::Ack, 1}).ack == 5);
    CHECK(apply_perturbation({0, 0, "SA", 0, 0, 0}, {Field::Flags, 1}).flags == "A");
    CHECK(apply_perturbation({0, 0, "SA", 0, 0, 0}, {Field::Flags, 0}).flags == "FSA");
    CHECK(apply_perturbation({0, 0, "", 0, 0, 7}, {Field::Length, 1400}).length == 1400);
}

TEST_CASE("seeded pairs differ in exactly the perturbed field") {
    std::mt19937_64 rng(2024);
    std::array<std::size_t, 6> counts{};
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto t = random_triple(rng, seed % 4);
        const auto s = make_pair(t, seed);
        REQUIRE(s.chosen == t.next);
        const auto diff = differing_fields(s.chosen, s.rejected);
        REQUIRE(diff.size() == 1);
        REQUIRE(diff[0] == s.perturbed_field);
        ++counts[static_cast<std::size_t>(s.perturbed_field)];
        if (s.perturbed_field == Field::Length) REQUIRE(s.rejected.length <= 1500);
    }
    for (auto c : counts) CHECK(c > 1500); // roughly uniform: expected 1667 each

    const auto t = random_triple(rng, 2);
    CHECK(make_pair(t, 77) == make_pair(t, 77));
}

TEST_CASE("render and parse") {
    SUBCASE("round trip over random samples") {
        std::mt19937_64 rng(8);
        std::vector<FinetuneSample> all;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            const auto s = make_pair(random_triple(rng, i % 6), i);
            const auto text = render_sample(s);
            REQUIRE(parse_sample(text) == s);
            REQUIRE(render_sample(parse_sample(text)) == text);
            all.push_back(s);
        }
        CHECK(parse_samples(render_samples(all)) == all);
    }
    SUBCASE("layout") {
        const FinetuneSample s{{}, {1, 2, "S", 3, 4, 5}, {2, 1, "SA", 6, 4, 0}, {2, 1, "SA", 6, 4, 9}, Field::Length};
        const std::string expected = "#Chosen\n#Context\n#Previous_Packet\n#BLOCK\nsport:1\ndport:2\nflags:S\nseq:3\n"
                                     "ack:4\nlength:5\n#Predicted_Packet\n#BLOCK\nsport:2\ndport:1\nflags:SA\nseq:6\n"
                                     "ack:4\nlength:0\n#Rejected\n#Context\n#Previous_Packet\n#BLOCK\nsport:1\n"
                                     "dport:2\nflags:S\nseq:3\nack:4\nlength:5\n#Predicted_Packet\n#BLOCK\nsport:2\n"
                                     "dport:1\nflags:SA\nseq:6\nack:4\nlength:9\n";
        CHECK(render_sample(s) == expected);
        CHECK(parse_sample(expected) == s);
    }
    SUBCASE("errors name the line") {
        const FinetuneSample s{{}, {1, 2, "S", 3, 4, 5}, {2, 1, "SA", 6, 4, 0}, {2, 1, "SA", 6, 4, 9}, Field::Length};
        const auto text = render_sample(s);

        auto missing_ack = text;
        missing_ack.erase(missing_ack.find("ack:4\n"), 6);
        CHECK_THROWS_WITH_AS(parse_sample(missing_ack), doctest::Contains("missing key 'ack'"), ParseError);

        auto duplicate = text;
        duplicate.insert(duplicate.find("seq:3\n"), "seq:3\n");
        CHECK_THROWS_WITH_AS(parse_sample(duplicate), doctest::Contains("line 9: duplicate key"), ParseError);

        auto unknown = "#Weird\n" + text;
        CHECK_THROWS_WITH_AS(parse_sample(unknown), doctest::Contains("line 1: unknown section"), ParseError);
    }
}

TEST_CASE("field scoring") {
    std::mt19937_64 rng(1);
    std::vector<PacketRecord> truth;
    for (int i = 0; i < 500; ++i) truth.push_back(random_packet(rng));
    const auto identity = score_fields(truth, truth);
    for (double a : identity.field_accuracy) CHECK(a == 100.0);
    CHECK(identity.error_histogram[0] == 100.0);
    CHECK(render_field_report(identity) ==
          "packets=500\nsport=100.00\ndport=100.00\nflags=100.00\nseq=100.00\nack=100.00\nlength=100.00\n"
          "errors_0=100.00\nerrors_1=0.00\nerrors_2=0.00\nerrors_3=0.00\nerrors_4plus=0.00\n");

    const std::vector<PacketRecord> two = {{1, 2, "A", 3, 4, 5}, {6, 7, "S", 8, 9, 10}};
    auto pred = two;
    pred[1].ack = 0;
    const auto r = score_fields(pred, two);
    CHECK(r.field_accuracy[4] == 50.0);
    CHECK(r.field_accuracy[0] == 100.0);
    CHECK(r.error_histogram[0] == 50.0);
    CHECK(r.error_histogram[1] == 50.0);

    auto all_wrong = two;
    for (auto& p : all_wrong) p = {0, 0, "", 0, 0, 0};
    CHECK(score_fields(all_wrong, two).error_histogram[4] == 100.0);

    CHECK_THROWS_AS(score_fields(two, truth), DimensionError);
}
