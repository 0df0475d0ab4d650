#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duplexweave/sequence.hpp"

namespace duplexweave {

// Binary sequence layout, all integers little-endian:
//   "DWSQ" | u16 version | u8 strategy | u8 text_channels | u32 tau_sc |
//   u32 tau_tc | u32 frame_rate_mhz | u32 uid aid eot text_pad eot_pad |
//   u32 provenance_len | provenance bytes | u64 count |
//   count x (u32 id | u8 kind | f32 weight)
inline constexpr char kSequenceMagic[4] = {'D', 'W', 'S', 'Q'};
inline constexpr std::uint16_t kSequenceVersion = 1;
inline constexpr std::size_t kSequenceRecordSize = 9;

std::size_t encoded_header_size(const InterleavedSequence& seq);
std::size_t encoded_token_offset(const InterleavedSequence& seq, std::size_t index);

std::vector<std::uint8_t> encode_sequence_binary(const InterleavedSequence& seq);
InterleavedSequence decode_sequence_binary(std::span<const std::uint8_t> bytes);

nlohmann::ordered_json sequence_to_json(const InterleavedSequence& seq);
InterleavedSequence sequence_from_json(const nlohmann::json& j);

// Recomputes chunk_index and channel of every token from kinds and ids.
void annotate_structure(InterleavedSequence& seq);

// Speech-token file: "DWTK" | u32 frame_rate_mhz | u32 ids...
inline constexpr char kTokenMagic[4] = {'D', 'W', 'T', 'K'};

std::vector<std::uint8_t> encode_token_stream(const TokenStream& stream);
TokenStream decode_token_stream(std::span<const std::uint8_t> bytes, Channel channel);

} // namespace duplexweave
