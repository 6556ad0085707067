// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "camnoise/kv_text.hpp"

namespace camnoise {

enum class SensorType { CCD, CMOS };

/// Sensor constants that are not exposed as estimator inputs.
struct FixedMetadata {
  double camera_offset = 0.0;                        // DN
  double cds_gain = 1.0;
  double cds_sample_to_sample_time = 1e-6;           // s
  double cds_time_factor = 0.5;
  double flicker_corner_frequency = 1e-6;            // Hz
  double source_follower_current_modulation = 1e-8;  // A
  double source_follower_gain = 1.0;

  bool operator==(const FixedMetadata&) const = default;
};

/// Variable camera parameters. Units: camera_gain in dB, exposure_time in s,
/// sensor_temperature in degrees Celsius, full_well_capacity in electrons,
/// pixel_clock_rate in Hz, sense_node_gain in V/e-, sensor_pixel_size in mm,
/// thermal_white_noise in V/sqrt(Hz).
struct CameraMetadata {
  double camera_gain = 0.0;
  double exposure_time = 0.001;
  double sensor_temperature = 0.0;
  double dark_signal_fom = 0.0;
  double full_well_capacity = 2e3;
  double pixel_clock_rate = 8e6;
  double sense_node_gain = 1e-6;
  double sense_node_reset_factor = 0.0;
  double sensor_pixel_size = 0.0009;
  SensorType sensor_type = SensorType::CCD;
  double thermal_white_noise = 1e-9;
  FixedMetadata fixed;

  bool operator==(const CameraMetadata&) const = default;
};

/// The eleven variable fields in canonical order. This order is the layout of
/// the normalized metadata vector and is recorded in checkpoints.
enum class MetaField {
  CameraGain,
  ExposureTime,
  SensorTemperature,
  DarkSignalFom,
  FullWellCapacity,
  PixelClockRate,
  SenseNodeGain,
  SenseNodeResetFactor,
  SensorPixelSize,
  SensorType,
  ThermalWhiteNoise,
};

inline constexpr std::size_t kNumMetaFields = 11;

struct FieldInfo {
  MetaField field;
  std::string_view name;
  double min;
  double max;
};

inline constexpr std::array<FieldInfo, kNumMetaFields> kMetaFields{{
    {MetaField::CameraGain, "camera_gain", 0.0, 24.0},
    {MetaField::ExposureTime, "exposure_time", 0.001, 0.2},
    {MetaField::SensorTemperature, "sensor_temperature", 0.0, 80.0},
    {MetaField::DarkSignalFom, "dark_signal_fom", 0.0, 1.0},
    {MetaField::FullWellCapacity, "full_well_capacity", 2e3, 100e3},
    {MetaField::PixelClockRate, "pixel_clock_rate", 8e6, 150e6},
    {MetaField::SenseNodeGain, "sense_node_gain", 1e-6, 5e-6},
    {MetaField::SenseNodeResetFactor, "sense_node_reset_factor", 0.0, 1.0},
    {MetaField::SensorPixelSize, "sensor_pixel_size", 0.0009, 0.01},
    {MetaField::SensorType, "sensor_type", 0.0, 1.0},
    {MetaField::ThermalWhiteNoise, "thermal_white_noise", 1e-9, 60e-9},
}};

const FieldInfo& field_info(MetaField field);
std::optional<MetaField> field_from_name(std::string_view name);

/// Numeric view of a field; sensor_type reads as CCD = 0, CMOS = 1.
double get_field(const CameraMetadata& meta, MetaField field);
void set_field(CameraMetadata& meta, MetaField field, double value);

/// Throws std::domain_error naming the first variable field outside its range.
void validate_ranges(const CameraMetadata& meta);

/// Weaker check used by the physics: every quantity finite, non-negative and
/// the divisors (full well, sense-node gain, CDS time) strictly positive.
/// Fault-injection scenarios rely on out-of-range but physical values.
void validate_physical(const CameraMetadata& meta);

CameraMetadata max_metadata(SensorType type = SensorType::CMOS);
CameraMetadata min_metadata(SensorType type = SensorType::CCD);

std::string_view to_string(SensorType type);
SensorType sensor_type_from_string(std::string_view text);

/// Serializes variable and fixed fields under `prefix` (e.g. "fed.").
void write_metadata(KvText& kv, const CameraMetadata& meta, const std::string& prefix = "");
/// Reads a metadata block; missing fixed fields keep their defaults.
CameraMetadata read_metadata(const KvText& kv, const std::string& prefix = "");
/// Like read_metadata but starts from `base` and only overrides keys present.
CameraMetadata overlay_metadata(const KvText& kv, CameraMetadata base, const std::string& prefix = "");

}  // namespace camnoise
