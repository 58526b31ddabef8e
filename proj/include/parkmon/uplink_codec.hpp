#pragma once

// Session uplink wire format.
//
//   byte 0     version (high nibble, = 1) | flags (low nibble)
//              flag bit0 presence, bit1 battery field present, bits 2-3 zero
//   bytes 1-2  duration_s, u16 big-endian, >= 10
//   byte 3     break_count, u8 (saturates at 255 on encode)
//   bytes 4-5  battery_mv, u16 big-endian, only when flag bit1 is set
//
// The envelope is the JSON body a network server posts to the ingestion
// webhook: {"device_id","received_at","payload_b64","rssi_dbm","snr_db"}.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parkmon/errors.hpp"
#include "parkmon/sensor_core.hpp"
#include "parkmon/time.hpp"

namespace parkmon {

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::uint8_t kFlagPresence = 0x1;
inline constexpr std::uint8_t kFlagBattery = 0x2;
inline constexpr std::int64_t kMinFrameDurationS = 10;

struct UplinkFrame {
    bool presence = false;
    std::uint16_t duration_s = 0;
    std::uint8_t break_count = 0;
    std::optional<std::uint16_t> battery_mv;

    bool operator==(const UplinkFrame&) const = default;
};

class EncodeError : public Error {
public:
    using Error::Error;
};

enum class DecodeErrc { Length, Version, ReservedFlags, BatteryMismatch, Duration };

std::string_view to_string(DecodeErrc code);

class DecodeError : public Error {
public:
    DecodeError(DecodeErrc code, const std::string& what) : Error(what), code_(code) {}
    DecodeErrc code() const noexcept { return code_; }

private:
    DecodeErrc code_;
};

std::vector<std::uint8_t> encode_frame(const UplinkFrame& f);
std::vector<std::uint8_t> encode_frame(const SessionRecord& r, std::optional<std::uint16_t> battery_mv = {});
UplinkFrame decode_frame(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Strict RFC 4648 with padding; nullopt on any malformed input.
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

std::string device_id_hex(std::uint32_t sensor_id);

struct UplinkEnvelope {
    std::string device_id;  // 8 lowercase hex chars
    UtcTime received_at;
    std::string payload_b64;
    std::optional<double> rssi_dbm;
    std::optional<double> snr_db;

    bool operator==(const UplinkEnvelope&) const = default;
};

enum class EnvelopeErrc { Json, Schema, Payload };

class EnvelopeError : public Error {
public:
    EnvelopeError(EnvelopeErrc code, const std::string& what, std::optional<DecodeErrc> frame_code = {})
        : Error(what), code_(code), frame_code_(frame_code) {}
    EnvelopeErrc code() const noexcept { return code_; }
    std::optional<DecodeErrc> frame_code() const noexcept { return frame_code_; }

private:
    EnvelopeErrc code_;
    std::optional<DecodeErrc> frame_code_;
};

std::string envelope_to_json(const UplinkEnvelope& env);

struct ParsedEnvelope {
    UplinkEnvelope envelope;
    UplinkFrame frame;
};

// Validates the schema and decodes the payload; throws EnvelopeError.
ParsedEnvelope parse_envelope(std::string_view json_text);

}  // namespace parkmon
