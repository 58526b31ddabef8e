#include "parkmon/uplink_codec.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace parkmon {

std::string_view to_string(DecodeErrc code) {
    switch (code) {
        case DecodeErrc::Length: return "length";
        case DecodeErrc::Version: return "version";
        case DecodeErrc::ReservedFlags: return "reserved_flags";
        case DecodeErrc::BatteryMismatch: return "battery_mismatch";
        case DecodeErrc::Duration: return "duration";
    }
    return "unknown";
}

std::vector<std::uint8_t> encode_frame(const UplinkFrame& f) {
    if (f.duration_s < kMinFrameDurationS) {
        throw EncodeError("duration " + std::to_string(f.duration_s) + " s below minimum of 10 s");
    }
    std::uint8_t flags = 0;
    if (f.presence) flags |= kFlagPresence;
    if (f.battery_mv) flags |= kFlagBattery;

    std::vector<std::uint8_t> out;
    out.reserve(6);
    out.push_back(static_cast<std::uint8_t>((kFrameVersion << 4) | flags));
    out.push_back(static_cast<std::uint8_t>(f.duration_s >> 8));
    out.push_back(static_cast<std::uint8_t>(f.duration_s & 0xFF));
    out.push_back(f.break_count);
    if (f.battery_mv) {
        out.push_back(static_cast<std::uint8_t>(*f.battery_mv >> 8));
        out.push_back(static_cast<std::uint8_t>(*f.battery_mv & 0xFF));
    }
    return out;
}

std::vector<std::uint8_t> encode_frame(const SessionRecord& r, std::optional<std::uint16_t> battery_mv) {
    if (r.duration_s < kMinFrameDurationS || r.duration_s > 0xFFFF) {
        throw EncodeError("duration " + std::to_string(r.duration_s) + " s outside [10, 65535]");
    }
    UplinkFrame f;
    f.presence = r.presence;
    f.duration_s = static_cast<std::uint16_t>(r.duration_s);
    f.break_count = static_cast<std::uint8_t>(std::clamp<std::int64_t>(r.break_count, 0, 255));
    f.battery_mv = battery_mv;
    return encode_frame(f);
}

UplinkFrame decode_frame(std::span<const std::uint8_t> b) {
    if (b.size() != 4 && b.size() != 6) {
        throw DecodeError(DecodeErrc::Length, "frame length " + std::to_string(b.size()) + ", expected 4 or 6");
    }
    const std::uint8_t version = b[0] >> 4;
    const std::uint8_t flags = b[0] & 0x0F;
    if (version != kFrameVersion) {
        throw DecodeError(DecodeErrc::Version, "unsupported frame version " + std::to_string(version));
    }
    if (flags & ~(kFlagPresence | kFlagBattery)) {
        throw DecodeError(DecodeErrc::ReservedFlags, "reserved flag bits set");
    }
    const bool has_battery = flags & kFlagBattery;
    if (has_battery != (b.size() == 6)) {
        throw DecodeError(DecodeErrc::BatteryMismatch, has_battery ? "battery flag set but field missing"
                                                                   : "battery bytes present but not declared");
    }
    UplinkFrame f;
    f.presence = flags & kFlagPresence;
    f.duration_s = static_cast<std::uint16_t>((b[1] << 8) | b[2]);
    f.break_count = b[3];
    if (has_battery) f.battery_mv = static_cast<std::uint16_t>((b[4] << 8) | b[5]);
    if (f.duration_s < kMinFrameDurationS) {
        throw DecodeError(DecodeErrc::Duration, "duration " + std::to_string(f.duration_s) + " s below minimum");
    }
    return f;
}

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) return std::nullopt;
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        int v[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && last && k >= 2) {
                v[k] = 0;
                ++pad;
                continue;
            }
            if (pad > 0) return std::nullopt;  // data after padding
            v[k] = b64_value(c);
            if (v[k] < 0) return std::nullopt;
        }
        const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out.push_back(static_cast<std::uint8_t>(word >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((word >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(word & 0xFF));
        // Non-canonical trailing bits would make two strings decode alike.
        if (pad == 2 && (word & 0xFFFF) != 0) return std::nullopt;
        if (pad == 1 && (word & 0xFF) != 0) return std::nullopt;
    }
    return out;
}

std::string device_id_hex(std::uint32_t sensor_id) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", sensor_id);
    return buf;
}

std::string envelope_to_json(const UplinkEnvelope& env) {
    nlohmann::ordered_json j;
    j["device_id"] = env.device_id;
    j["received_at"] = format_rfc3339(env.received_at);
    j["payload_b64"] = env.payload_b64;
    if (env.rssi_dbm) j["rssi_dbm"] = *env.rssi_dbm;
    if (env.snr_db) j["snr_db"] = *env.snr_db;
    return j.dump();
}

namespace {

bool is_hex_id(const std::string& s) {
    if (s.size() != 8) return false;
    for (char c : s) {
        const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
        if (!hex) return false;
    }
    return true;
}

std::optional<double> optional_metric(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    const auto& v = j.at(key);
    if (!v.is_number()) throw EnvelopeError(EnvelopeErrc::Schema, std::string(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw EnvelopeError(EnvelopeErrc::Schema, std::string(key) + " must be finite");
    return d;
}

}  // namespace

ParsedEnvelope parse_envelope(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw EnvelopeError(EnvelopeErrc::Json, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw EnvelopeError(EnvelopeErrc::Schema, "envelope must be a JSON object");

    auto require_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j.at(key).is_string())
            throw EnvelopeError(EnvelopeErrc::Schema, std::string("missing string field ") + key);
        return j.at(key).get<std::string>();
    };

    ParsedEnvelope out;
    std::string id = require_string("device_id");
    if (!is_hex_id(id)) throw EnvelopeError(EnvelopeErrc::Schema, "device_id must be 8 hex characters");
    for (char& c : id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.envelope.device_id = id;

    const std::string ts = require_string("received_at");
    const auto parsed = parse_rfc3339(ts);
    if (!parsed) throw EnvelopeError(EnvelopeErrc::Schema, "received_at is not an RFC 3339 timestamp");
    out.envelope.received_at = *parsed;

    out.envelope.payload_b64 = require_string("payload_b64");
    out.envelope.rssi_dbm = optional_metric(j, "rssi_dbm");
    out.envelope.snr_db = optional_metric(j, "snr_db");

    const auto bytes = base64_decode(out.envelope.payload_b64);
    if (!bytes) throw EnvelopeError(EnvelopeErrc::Payload, "payload_b64 is not valid base64");
    try {
        out.frame = decode_frame(*bytes);
    } catch (const DecodeError& e) {
        throw EnvelopeError(EnvelopeErrc::Payload, std::string("payload: ") + e.what(), e.code());
    }
    return out;
}

}  // namespace parkmon
