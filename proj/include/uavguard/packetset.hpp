#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace uavguard::packetset {

// The six key fields that are predicted and scored, in rendering order.
enum class Field { Sport, Dport, Flags, Seq, Ack, Length };

inline constexpr std::array<Field, 6> kFields = {Field::Sport, Field::Dport, Field::Flags,
                                                 Field::Seq,   Field::Ack,   Field::Length};
inline constexpr std::string_view kFlagAlphabet = "FSRPAUEC";

std::string_view field_name(Field field);
Field parse_field(std::string_view name);

// Validates a flag string (unique letters from kFlagAlphabet) and returns it
// in alphabet order.
std::string canonical_flags(std::string_view flags);

struct PacketRecord {
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    std::string flags; // canonical order; empty for UDP
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint32_t length = 0;

    bool operator==(const PacketRecord&) const = default;
};

// Fields in which two packets differ.
std::vector<Field> differing_fields(const PacketRecord& a, const PacketRecord& b);

// ---- packet logs and sessions ---------------------------------------------

struct PacketEvent {
    double timestamp = 0.0; // seconds
    std::string src;
    std::string dst;
    PacketRecord packet;
};

// CSV with header timestamp,src,dst,sport,dport,flags,seq,ack,length.
std::vector<PacketEvent> parse_packet_log(std::istream& in);
std::vector<PacketEvent> read_packet_log(const std::string& path);
std::string render_packet_log(const std::vector<PacketEvent>& events);

// Any CSV whose header names the six key fields (other columns ignored).
std::vector<PacketRecord> parse_packet_fields(std::istream& in);
std::vector<PacketRecord> read_packet_fields(const std::string& path);

struct Session {
    std::string id;
    std::vector<PacketEvent> packets; // time ordered
};

struct SessionConfig {
    double idle_timeout_s = 60.0;
};

// Groups packets by bidirectional endpoint pair. A session ends after an
// idle gap longer than the timeout, or once it is closed (RST, or FIN seen
// in both directions); after closing, trailing pure ACKs still attach to it.
std::vector<Session> extract_sessions(std::vector<PacketEvent> events,
                                      const SessionConfig& config = {});

struct Triple {
    std::vector<PacketRecord> context; // the n packets before the prompt
    PacketRecord prompt;
    PacketRecord next;
};

// One triple per position with n_context predecessors and a successor:
// max(0, len - n_context - 1) triples.
std::vector<Triple> build_windows(const Session& session, std::size_t n_context);

// ---- preference pairs -----------------------------------------------------

// Single-field edit. `amount` is a signed offset (ports wrap mod 2^16, seq and
// ack mod 2^32), the replacement value for Length, and the index of the
// letter to toggle in kFlagAlphabet for Flags.
struct Perturbation {
    Field field = Field::Sport;
    std::int64_t amount = 0;
};

PacketRecord apply_perturbation(const PacketRecord& packet, const Perturbation& perturbation);
Perturbation draw_perturbation(const PacketRecord& packet, std::mt19937_64& rng);

struct FinetuneSample {
    std::vector<PacketRecord> context;
    PacketRecord prompt;
    PacketRecord chosen;
    PacketRecord rejected;
    Field perturbed_field = Field::Sport;

    bool operator==(const FinetuneSample&) const = default;
};

FinetuneSample make_pair(const Triple& triple, std::uint64_t seed);
FinetuneSample make_pair(const Triple& triple, const Perturbation& perturbation);

// Two documents (#Chosen, #Rejected) sharing the context and prompt, each
// with #Context, #Previous_Packet and #Predicted_Packet sections of #BLOCKs.
std::string render_sample(const FinetuneSample& sample);
FinetuneSample parse_sample(std::string_view text);

// Samples separated by one blank line.
std::string render_samples(const std::vector<FinetuneSample>& samples);
std::vector<FinetuneSample> parse_samples(std::string_view text);

// ---- scoring --------------------------------------------------------------

struct FieldScoreReport {
    std::size_t packets = 0;
    std::array<double, 6> field_accuracy{};  // percent, kFields order
    std::array<double, 5> error_histogram{}; // percent with 0,1,2,3,4+ wrong fields
};

FieldScoreReport score_fields(const std::vector<PacketRecord>& predicted,
                              const std::vector<PacketRecord>& truth);
std::string render_field_report(const FieldScoreReport& report);

} // namespace uavguard::packetset
