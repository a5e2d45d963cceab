#include "uavguard/packetset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "uavguard/error.hpp"
#include "uavguard/text.hpp"

namespace uavguard::packetset {

namespace {

constexpr std::array<std::string_view, 6> kFieldNames = {"sport", "dport", "flags", "seq", "ack", "length"};

std::string row_error(std::size_t row, const std::string& message) {
    return "row " + std::to_string(row) + ": " + message;
}

template <typename T>
T parse_unsigned(std::string_view value, std::uint64_t max, std::string_view what) {
    const auto v = text::to_uint(text::trim(value));
    if (!v || *v > max) throw ParseError(std::string(what) + " is not an integer in [0, " + std::to_string(max) + "]: '" + std::string(value) + "'");
    return static_cast<T>(*v);
}

// Fills one key field from its textual value. Messages carry no location.
void set_field(PacketRecord& p, Field f, std::string_view value) {
    switch (f) {
    case Field::Sport: p.sport = parse_unsigned<std::uint16_t>(value, 65535, "sport"); break;
    case Field::Dport: p.dport = parse_unsigned<std::uint16_t>(value, 65535, "dport"); break;
    case Field::Flags: p.flags = canonical_flags(text::trim(value)); break;
    case Field::Seq: p.seq = parse_unsigned<std::uint32_t>(value, 0xffffffffULL, "seq"); break;
    case Field::Ack: p.ack = parse_unsigned<std::uint32_t>(value, 0xffffffffULL, "ack"); break;
    case Field::Length: p.length = parse_unsigned<std::uint32_t>(value, 0xffffffffULL, "length"); break;
    }
}

std::string field_value(const PacketRecord& p, Field f) {
    switch (f) {
    case Field::Sport: return std::to_string(p.sport);
    case Field::Dport: return std::to_string(p.dport);
    case Field::Flags: return p.flags;
    case Field::Seq: return std::to_string(p.seq);
    case Field::Ack: return std::to_string(p.ack);
    case Field::Length: return std::to_string(p.length);
    }
    return {};
}

bool field_equal(const PacketRecord& a, const PacketRecord& b, Field f) {
    switch (f) {
    case Field::Sport: return a.sport == b.sport;
    case Field::Dport: return a.dport == b.dport;
    case Field::Flags: return a.flags == b.flags;
    case Field::Seq: return a.seq == b.seq;
    case Field::Ack: return a.ack == b.ack;
    case Field::Length: return a.length == b.length;
    }
    return false;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    return lines;
}

std::vector<PacketEvent> parse_packet_jsonl(std::istream& in) {
    std::vector<PacketEvent> events;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PacketEvent e;
            e.timestamp = j.at("timestamp").get<double>();
            e.src = j.at("src").get<std::string>();
            e.dst = j.at("dst").get<std::string>();
            for (Field f : kFields) {
                const auto& v = j.at(std::string(field_name(f)));
                set_field(e.packet, f, v.is_string() ? v.get<std::string>() : v.dump());
            }
            events.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(row_error(row, ex.what()));
        } catch (const ParseError& ex) {
            throw ParseError(row_error(row, ex.what()));
        }
    }
    return events;
}

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
    auto operator<=>(const Endpoint&) const = default;
};

struct SessionState {
    std::size_t session = 0;
    double last_ts = 0.0;
    bool fin_low = false;  // FIN sent by the lower endpoint
    bool fin_high = false;
    bool closed = false;
};

bool has_flag(const PacketRecord& p, char c) { return p.flags.find(c) != std::string::npos; }

bool pure_ack(const PacketRecord& p) { return p.flags == "A" && p.length == 0; }

} // namespace

std::string_view field_name(Field field) { return kFieldNames[static_cast<std::size_t>(field)]; }

Field parse_field(std::string_view name) {
    for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
        if (kFieldNames[i] == name) return kFields[i];
    }
    throw ConfigError("unknown packet field '" + std::string(name) + "'");
}

std::string canonical_flags(std::string_view flags) {
    std::array<bool, kFlagAlphabet.size()> seen{};
    for (char c : flags) {
        const auto pos = kFlagAlphabet.find(c);
        if (pos == std::string_view::npos) throw ParseError("invalid TCP flag '" + std::string(1, c) + "'");
        if (seen[pos]) throw ParseError("duplicate TCP flag '" + std::string(1, c) + "'");
        seen[pos] = true;
    }
    std::string out;
    for (std::size_t i = 0; i < kFlagAlphabet.size(); ++i) {
        if (seen[i]) out.push_back(kFlagAlphabet[i]);
    }
    return out;
}

std::vector<Field> differing_fields(const PacketRecord& a, const PacketRecord& b) {
    std::vector<Field> out;
    for (Field f : kFields) {
        if (!field_equal(a, b, f)) out.push_back(f);
    }
    return out;
}

std::vector<PacketEvent> parse_packet_log(std::istream& in) {
    const int first = (in >> std::ws).peek();
    if (first == '{') return parse_packet_jsonl(in);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("row 1: empty packet log");
    const auto header = text::split(text::trim(line), ',');
    static constexpr std::array<std::string_view, 9> kHeader = {"timestamp", "src", "dst", "sport", "dport",
                                                                "flags", "seq", "ack", "length"};
    if (header.size() != kHeader.size() || !std::equal(header.begin(), header.end(), kHeader.begin())) {
        throw ParseError("row 1: expected header timestamp,src,dst,sport,dport,flags,seq,ack,length");
    }
    std::vector<PacketEvent> events;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(text::trim(line), ',');
        if (cells.size() != kHeader.size()) {
            throw ParseError(row_error(row, "expected 9 columns, got " + std::to_string(cells.size())));
        }
        PacketEvent e;
        const auto ts = text::to_double(text::trim(cells[0]));
        if (!ts) throw ParseError(row_error(row, "bad timestamp '" + std::string(cells[0]) + "'"));
        e.timestamp = *ts;
        e.src = std::string(text::trim(cells[1]));
        e.dst = std::string(text::trim(cells[2]));
        try {
            for (std::size_t i = 0; i < kFields.size(); ++i) set_field(e.packet, kFields[i], cells[3 + i]);
        } catch (const ParseError& ex) {
            throw ParseError(row_error(row, ex.what()));
        }
        events.push_back(std::move(e));
    }
    return events;
}

std::vector<PacketEvent> read_packet_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open packet log '" + path + "'");
    return parse_packet_log(in);
}

std::string render_packet_log(const std::vector<PacketEvent>& events) {
    std::ostringstream out;
    out << "timestamp,src,dst,sport,dport,flags,seq,ack,length\n";
    for (const auto& e : events) {
        out << text::format_double(e.timestamp) << ',' << e.src << ',' << e.dst;
        for (Field f : kFields) out << ',' << field_value(e.packet, f);
        out << '\n';
    }
    return out.str();
}

std::vector<PacketRecord> parse_packet_fields(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("row 1: empty packet file");
    const auto header = text::split(text::trim(line), ',');
    std::array<std::size_t, 6> column{};
    for (std::size_t k = 0; k < kFields.size(); ++k) {
        const auto it = std::find_if(header.begin(), header.end(),
                                     [&](std::string_view h) { return text::trim(h) == kFieldNames[k]; });
        if (it == header.end()) throw ParseError("row 1: missing column '" + std::string(kFieldNames[k]) + "'");
        column[k] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<PacketRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(text::trim(line), ',');
        if (cells.size() != header.size()) {
            throw ParseError(row_error(row, "expected " + std::to_string(header.size()) + " columns"));
        }
        PacketRecord p;
        try {
            for (std::size_t k = 0; k < kFields.size(); ++k) set_field(p, kFields[k], cells[column[k]]);
        } catch (const ParseError& ex) {
            throw ParseError(row_error(row, ex.what()));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PacketRecord> read_packet_fields(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open packet file '" + path + "'");
    return parse_packet_fields(in);
}

std::vector<Session> extract_sessions(std::vector<PacketEvent> events, const SessionConfig& config) {
    std::stable_sort(events.begin(), events.end(),
                     [](const PacketEvent& a, const PacketEvent& b) { return a.timestamp < b.timestamp; });

    std::vector<Session> sessions;
    std::map<std::pair<Endpoint, Endpoint>, SessionState> open;
    for (auto& e : events) {
        Endpoint from{e.src, e.packet.sport};
        Endpoint to{e.dst, e.packet.dport};
        const bool low = from < to;
        auto key = low ? std::pair{from, to} : std::pair{to, from};

        auto it = open.find(key);
        bool fresh = it == open.end();
        if (!fresh) {
            const auto& st = it->second;
            if (e.timestamp - st.last_ts > config.idle_timeout_s) fresh = true;
            else if (st.closed && !pure_ack(e.packet)) fresh = true;
        }
        if (fresh) {
            SessionState st;
            st.session = sessions.size();
            sessions.push_back({"s" + std::to_string(sessions.size()), {}});
            it = open.insert_or_assign(key, st).first;
        }
        auto& st = it->second;
        st.last_ts = e.timestamp;
        if (has_flag(e.packet, 'F')) (low ? st.fin_low : st.fin_high) = true;
        if (has_flag(e.packet, 'R') || (st.fin_low && st.fin_high)) st.closed = true;
        sessions[st.session].packets.push_back(std::move(e));
    }
    return sessions;
}

std::vector<Triple> build_windows(const Session& session, std::size_t n_context) {
    std::vector<Triple> out;
    const auto& pk = session.packets;
    for (std::size_t i = n_context; i + 1 < pk.size(); ++i) {
        Triple t;
        for (std::size_t j = i - n_context; j < i; ++j) t.context.push_back(pk[j].packet);
        t.prompt = pk[i].packet;
        t.next = pk[i + 1].packet;
        out.push_back(std::move(t));
    }
    return out;
}

PacketRecord apply_perturbation(const PacketRecord& packet, const Perturbation& p) {
    PacketRecord out = packet;
    const auto wrap = [](std::int64_t v, std::int64_t m) { return ((v % m) + m) % m; };
    switch (p.field) {
    case Field::Sport: out.sport = static_cast<std::uint16_t>(wrap(packet.sport + p.amount, 65536)); break;
    case Field::Dport: out.dport = static_cast<std::uint16_t>(wrap(packet.dport + p.amount, 65536)); break;
    case Field::Seq: out.seq = static_cast<std::uint32_t>(wrap(packet.seq + p.amount, 1LL << 32)); break;
    case Field::Ack: out.ack = static_cast<std::uint32_t>(wrap(packet.ack + p.amount, 1LL << 32)); break;
    case Field::Length:
        if (p.amount < 0) throw ConfigError("length replacement must be non-negative");
        out.length = static_cast<std::uint32_t>(p.amount);
        break;
    case Field::Flags: {
        const char letter = kFlagAlphabet[static_cast<std::size_t>(wrap(p.amount, kFlagAlphabet.size()))];
        std::string f = out.flags;
        const auto pos = f.find(letter);
        if (pos == std::string::npos) f.push_back(letter);
        else f.erase(pos, 1);
        out.flags = canonical_flags(f);
        break;
    }
    }
    return out;
}

Perturbation draw_perturbation(const PacketRecord& packet, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, kFields.size() - 1);
    std::bernoulli_distribution negative(0.5);
    Perturbation p{kFields[pick(rng)], 0};
    switch (p.field) {
    case Field::Sport:
    case Field::Dport: {
        std::uniform_int_distribution<std::int64_t> mag(1, 1000);
        p.amount = mag(rng);
        if (negative(rng)) p.amount = -p.amount;
        break;
    }
    case Field::Seq:
    case Field::Ack: {
        std::uniform_int_distribution<std::int64_t> mag(1, 1000000);
        p.amount = mag(rng);
        if (negative(rng)) p.amount = -p.amount;
        break;
    }
    case Field::Length: {
        std::uniform_int_distribution<std::int64_t> len(0, 1500);
        do {
            p.amount = len(rng);
        } while (p.amount == static_cast<std::int64_t>(packet.length));
        break;
    }
    case Field::Flags: {
        std::uniform_int_distribution<std::int64_t> letter(0, kFlagAlphabet.size() - 1);
        p.amount = letter(rng);
        break;
    }
    }
    return p;
}

FinetuneSample make_pair(const Triple& triple, const Perturbation& perturbation) {
    return {triple.context, triple.prompt, triple.next, apply_perturbation(triple.next, perturbation),
            perturbation.field};
}

FinetuneSample make_pair(const Triple& triple, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return make_pair(triple, draw_perturbation(triple.next, rng));
}

namespace {

void render_block(std::ostringstream& out, const PacketRecord& p) {
    out << "#BLOCK\n";
    for (Field f : kFields) out << field_name(f) << ':' << field_value(p, f) << '\n';
}

void render_document(std::ostringstream& out, std::string_view title, const FinetuneSample& s,
                     const PacketRecord& predicted) {
    out << '#' << title << '\n' << "#Context\n";
    for (const auto& c : s.context) render_block(out, c);
    out << "#Previous_Packet\n";
    render_block(out, s.prompt);
    out << "#Predicted_Packet\n";
    render_block(out, predicted);
}

struct Document {
    std::vector<PacketRecord> context;
    std::vector<PacketRecord> previous;
    std::vector<PacketRecord> predicted;
};

enum class Section { None, Context, Previous, Predicted };

// Line-driven parser; `base` is the 1-based number of the first line.
class SampleParser {
public:
    SampleParser(std::string_view text, std::size_t base) : lines_(lines_of(text)), base_(base) {}

    FinetuneSample run() {
        std::optional<Document> chosen, rejected;
        Document* doc = nullptr;
        Section section = Section::None;

        for (std::size_t i = 0; i < lines_.size(); ++i) {
            const auto line = lines_[i];
            const std::size_t no = base_ + i;
            if (line.empty()) fail(no, "blank line inside a sample");
            if (line[0] == '#') {
                finish_block();
                if (line == "#Chosen" || line == "#Rejected") {
                    auto& slot = line == "#Chosen" ? chosen : rejected;
                    if (slot) fail(no, "duplicate section '" + std::string(line) + "'");
                    slot.emplace();
                    doc = &*slot;
                    section = Section::None;
                } else if (line == "#Context" || line == "#Previous_Packet" || line == "#Predicted_Packet") {
                    if (!doc) fail(no, "section '" + std::string(line) + "' outside #Chosen/#Rejected");
                    section = line == "#Context" ? Section::Context
                              : line == "#Previous_Packet" ? Section::Previous
                                                           : Section::Predicted;
                } else if (line == "#BLOCK") {
                    if (section == Section::None) fail(no, "#BLOCK outside a section");
                    auto& target = section == Section::Context    ? doc->context
                                   : section == Section::Previous ? doc->previous
                                                                  : doc->predicted;
                    block_.emplace(Block{no, &target});
                } else {
                    fail(no, "unknown section '" + std::string(line) + "'");
                }
                continue;
            }
            if (!block_) fail(no, "key:value line outside a #BLOCK");
            const auto colon = line.find(':');
            if (colon == std::string_view::npos) fail(no, "expected key:value");
            const auto key = line.substr(0, colon);
            const auto pos = std::find(kFieldNames.begin(), kFieldNames.end(), key);
            if (pos == kFieldNames.end()) fail(no, "unknown key '" + std::string(key) + "'");
            const auto k = static_cast<std::size_t>(pos - kFieldNames.begin());
            if (block_->seen[k]) fail(no, "duplicate key '" + std::string(key) + "'");
            block_->seen[k] = true;
            try {
                set_field(block_->packet, kFields[k], line.substr(colon + 1));
            } catch (const ParseError& ex) {
                fail(no, ex.what());
            }
        }
        finish_block();

        const std::size_t end = base_ + lines_.size();
        if (!chosen) fail(end, "missing #Chosen document");
        if (!rejected) fail(end, "missing #Rejected document");
        for (const Document* d : {&*chosen, &*rejected}) {
            if (d->previous.size() != 1) fail(end, "#Previous_Packet needs exactly one #BLOCK");
            if (d->predicted.size() != 1) fail(end, "#Predicted_Packet needs exactly one #BLOCK");
        }
        if (chosen->context != rejected->context || chosen->previous != rejected->previous) {
            fail(end, "#Chosen and #Rejected must share context and previous packet");
        }
        FinetuneSample s{chosen->context, chosen->previous[0], chosen->predicted[0], rejected->predicted[0],
                         Field::Sport};
        const auto diff = differing_fields(s.chosen, s.rejected);
        if (diff.size() != 1) {
            fail(end, "chosen and rejected must differ in exactly one field, found " + std::to_string(diff.size()));
        }
        s.perturbed_field = diff[0];
        return s;
    }

private:
    struct Block {
        std::size_t line;
        std::vector<PacketRecord>* target;
        PacketRecord packet{};
        std::array<bool, 6> seen{};
    };

    [[noreturn]] static void fail(std::size_t line, const std::string& message) {
        throw ParseError("line " + std::to_string(line) + ": " + message);
    }

    void finish_block() {
        if (!block_) return;
        for (std::size_t k = 0; k < kFieldNames.size(); ++k) {
            if (!block_->seen[k]) {
                fail(block_->line, "#BLOCK missing key '" + std::string(kFieldNames[k]) + "'");
            }
        }
        block_->target->push_back(block_->packet);
        block_.reset();
    }

    std::vector<std::string_view> lines_;
    std::size_t base_;
    std::optional<Block> block_;
};

} // namespace

std::string render_sample(const FinetuneSample& sample) {
    std::ostringstream out;
    render_document(out, "Chosen", sample, sample.chosen);
    render_document(out, "Rejected", sample, sample.rejected);
    return out.str();
}

FinetuneSample parse_sample(std::string_view text) { return SampleParser(text, 1).run(); }

std::string render_samples(const std::vector<FinetuneSample>& samples) {
    std::string out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i > 0) out += '\n';
        out += render_sample(samples[i]);
    }
    return out;
}

std::vector<FinetuneSample> parse_samples(std::string_view text) {
    std::vector<FinetuneSample> out;
    const auto lines = lines_of(text);
    std::size_t start = 0;
    const auto flush = [&](std::size_t end) {
        if (end == start) return;
        const char* first = lines[start].data();
        const char* last = lines[end - 1].data() + lines[end - 1].size();
        out.push_back(SampleParser(std::string_view(first, static_cast<std::size_t>(last - first)), start + 1).run());
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            flush(i);
            start = i + 1;
        }
    }
    flush(lines.size());
    return out;
}

FieldScoreReport score_fields(const std::vector<PacketRecord>& predicted, const std::vector<PacketRecord>& truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("predicted has " + std::to_string(predicted.size()) + " packets, truth has " +
                             std::to_string(truth.size()));
    }
    FieldScoreReport r;
    r.packets = truth.size();
    if (truth.empty()) return r;

    std::array<std::size_t, 6> correct{};
    std::array<std::size_t, 5> buckets{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::size_t wrong = 0;
        for (std::size_t k = 0; k < kFields.size(); ++k) {
            if (field_equal(predicted[i], truth[i], kFields[k])) ++correct[k];
            else ++wrong;
        }
        ++buckets[std::min<std::size_t>(wrong, 4)];
    }
    const double n = static_cast<double>(truth.size());
    for (std::size_t k = 0; k < correct.size(); ++k) r.field_accuracy[k] = 100.0 * static_cast<double>(correct[k]) / n;
    for (std::size_t b = 0; b < buckets.size(); ++b) r.error_histogram[b] = 100.0 * static_cast<double>(buckets[b]) / n;
    return r;
}

std::string render_field_report(const FieldScoreReport& report) {
    std::ostringstream out;
    out << "packets=" << report.packets << '\n';
    for (std::size_t k = 0; k < kFields.size(); ++k) {
        out << kFieldNames[k] << '=' << text::format_fixed(report.field_accuracy[k], 2) << '\n';
    }
    static constexpr std::array<std::string_view, 5> kBuckets = {"errors_0", "errors_1", "errors_2", "errors_3",
                                                                 "errors_4plus"};
    for (std::size_t b = 0; b < kBuckets.size(); ++b) {
        out << kBuckets[b] << '=' << text::format_fixed(report.error_histogram[b], 2) << '\n';
    }
    return out.str();
}

} // namespace uavguard::packetset
