#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "breathradar/caf.hpp"
#include "breathradar/cfar.hpp"
#include "breathradar/common.hpp"

namespace breathradar {

// PRIQ: little-endian IQ capture, one channel per file.
//   "PRIQ" | u16 version=1 | f64 sample_rate | u64 sample_count | (f32 I, f32 Q)*
inline constexpr std::uint16_t kPriqVersion = 1;
inline constexpr std::size_t kPriqHeaderBytes = 4 + 2 + 8 + 8;

void write_priq(const std::filesystem::path& path, const IQBuffer& buf);
IQBuffer read_priq(const std::filesystem::path& path);

// PSGM: little-endian spectrogram / detection matrix.
//   "PSGM" | u16 version=1 | u32 rows | u32 cols | u8 kind | body (row-major)
// kind 0: f32 per cell; kind 1: (f32 re, f32 im) per cell.
inline constexpr std::uint16_t kPsgmVersion = 1;
inline constexpr std::size_t kPsgmHeaderBytes = 4 + 2 + 4 + 4 + 1;

enum class PsgmKind : std::uint8_t { Magnitude = 0, Complex = 1 };

struct Psgm {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    PsgmKind kind = PsgmKind::Magnitude;
    std::vector<float> data;  // rows*cols (kind 0) or 2*rows*cols (kind 1)

    std::vector<cplx> complex_values() const;
};

void write_psgm(const std::filesystem::path& path, const Psgm& m);
Psgm read_psgm(const std::filesystem::path& path);

Psgm to_psgm_complex(const DopplerMap& map);
Psgm to_psgm_magnitude(const DopplerMap& map);
Psgm to_psgm_detections(const CfarMap& m);
Psgm to_psgm_thresholds(const CfarMap& m);

/// Rebuilds a DopplerMap from a complex PSGM and its axes.
DopplerMap doppler_map_from_psgm(const Psgm& m, std::vector<double> doppler_axis, std::vector<double> time_axis,
                                 int channel_id);

/// Writes JSON text atomically enough for our purposes (whole-file write).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace breathradar
