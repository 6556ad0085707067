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

#include "camnoise/metadata.hpp"

#include <cmath>
#include <stdexcept>

namespace camnoise {

const FieldInfo& field_info(MetaField field) {
  return kMetaFields[static_cast<std::size_t>(field)];
}

std::optional<MetaField> field_from_name(std::string_view name) {
  for (const auto& info : kMetaFields)
    if (info.name == name) return info.field;
  return std::nullopt;
}

double get_field(const CameraMetadata& m, MetaField field) {
  switch (field) {
    case MetaField::CameraGain: return m.camera_gain;
    case MetaField::ExposureTime: return m.exposure_time;
    case MetaField::SensorTemperature: return m.sensor_temperature;
    case MetaField::DarkSignalFom: return m.dark_signal_fom;
    case MetaField::FullWellCapacity: return m.full_well_capacity;
    case MetaField::PixelClockRate: return m.pixel_clock_rate;
    case MetaField::SenseNodeGain: return m.sense_node_gain;
    case MetaField::SenseNodeResetFactor: return m.sense_node_reset_factor;
    case MetaField::SensorPixelSize: return m.sensor_pixel_size;
    case MetaField::SensorType: return m.sensor_type == SensorType::CMOS ? 1.0 : 0.0;
    case MetaField::ThermalWhiteNoise: return m.thermal_white_noise;
  }
  throw std::logic_error("get_field: bad field");
}

void set_field(CameraMetadata& m, MetaField field, double v) {
  switch (field) {
    case MetaField::CameraGain: m.camera_gain = v; return;
    case MetaField::ExposureTime: m.exposure_time = v; return;
    case MetaField::SensorTemperature: m.sensor_temperature = v; return;
    case MetaField::DarkSignalFom: m.dark_signal_fom = v; return;
    case MetaField::FullWellCapacity: m.full_well_capacity = v; return;
    case MetaField::PixelClockRate: m.pixel_clock_rate = v; return;
    case MetaField::SenseNodeGain: m.sense_node_gain = v; return;
    case MetaField::SenseNodeResetFactor: m.sense_node_reset_factor = v; return;
    case MetaField::SensorPixelSize: m.sensor_pixel_size = v; return;
    case MetaField::SensorType:
      if (v != 0.0 && v != 1.0) throw std::domain_error("sensor_type must be 0 (CCD) or 1 (CMOS)");
      m.sensor_type = v == 1.0 ? SensorType::CMOS : SensorType::CCD;
      return;
    case MetaField::ThermalWhiteNoise: m.thermal_white_noise = v; return;
  }
  throw std::logic_error("set_field: bad field");
}

void validate_ranges(const CameraMetadata& meta) {
  for (const auto& info : kMetaFields) {
    const double v = get_field(meta, info.field);
    if (!std::isfinite(v) || v < info.min || v > info.max) {
      throw std::domain_error(std::string(info.name) + " = " + format_exact(v) + " outside [" +
                              format_exact(info.min) + ", " + format_exact(info.max) + "]");
    }
  }
}

void validate_physical(const CameraMetadata& meta) {
  for (const auto& info : kMetaFields) {
    const double v = get_field(meta, info.field);
    if (!std::isfinite(v) || v < 0.0)
      throw std::domain_error(std::string(info.name) + " must be finite and non-negative");
  }
  if (meta.full_well_capacity <= 0.0) throw std::domain_error("full_well_capacity must be positive");
  if (meta.sense_node_gain <= 0.0) throw std::domain_error("sense_node_gain must be positive");
  if (meta.sensor_temperature + 273.15 <= 0.0)
    throw std::domain_error("sensor_temperature below absolute zero");
  const auto& f = meta.fixed;
  if (!(f.cds_sample_to_sample_time > 0.0) || !(f.cds_time_factor > 0.0))
    throw std::domain_error("CDS timing constants must be positive");
  if (!(f.cds_gain > 0.0) || !(f.source_follower_gain > 0.0))
    throw std::domain_error("CDS and source-follower gains must be positive");
}

CameraMetadata max_metadata(SensorType type) {
  CameraMetadata m;
  for (const auto& info : kMetaFields)
    if (info.field != MetaField::SensorType) set_field(m, info.field, info.max);
  m.sensor_type = type;
  return m;
}

CameraMetadata min_metadata(SensorType type) {
  CameraMetadata m;
  for (const auto& info : kMetaFields)
    if (info.field != MetaField::SensorType) set_field(m, info.field, info.min);
  m.sensor_type = type;
  return m;
}

std::string_view to_string(SensorType type) { return type == SensorType::CMOS ? "CMOS" : "CCD"; }

SensorType sensor_type_from_string(std::string_view text) {
  if (text == "CMOS" || text == "cmos" || text == "1") return SensorType::CMOS;
  if (text == "CCD" || text == "ccd" || text == "0") return SensorType::CCD;
  throw std::domain_error("unknown sensor type '" + std::string(text) + "'");
}

void write_metadata(KvText& kv, const CameraMetadata& meta, const std::string& prefix) {
  for (const auto& info : kMetaFields) {
    const std::string key = prefix + std::string(info.name);
    if (info.field == MetaField::SensorType)
      kv.set(key, std::string(to_string(meta.sensor_type)));
    else
      kv.set(key, get_field(meta, info.field));
  }
  const auto& f = meta.fixed;
  kv.set(prefix + "camera_offset", f.camera_offset);
  kv.set(prefix + "cds_gain", f.cds_gain);
  kv.set(prefix + "cds_sample_to_sample_time", f.cds_sample_to_sample_time);
  kv.set(prefix + "cds_time_factor", f.cds_time_factor);
  kv.set(prefix + "flicker_corner_frequency", f.flicker_corner_frequency);
  kv.set(prefix + "source_follower_current_modulation", f.source_follower_current_modulation);
  kv.set(prefix + "source_follower_gain", f.source_follower_gain);
}

CameraMetadata overlay_metadata(const KvText& kv, CameraMetadata m, const std::string& prefix) {
  for (const auto& info : kMetaFields) {
    const std::string key = prefix + std::string(info.name);
    if (!kv.contains(key)) continue;
    if (info.field == MetaField::SensorType)
      m.sensor_type = sensor_type_from_string(kv.get(key));
    else
      set_field(m, info.field, kv.get_double(key));
  }
  auto opt = [&](const char* name, double& field) {
    const std::string key = prefix + name;
    if (kv.contains(key)) field = kv.get_double(key);
  };
  opt("camera_offset", m.fixed.camera_offset);
  opt("cds_gain", m.fixed.cds_gain);
  opt("cds_sample_to_sample_time", m.fixed.cds_sample_to_sample_time);
  opt("cds_time_factor", m.fixed.cds_time_factor);
  opt("flicker_corner_frequency", m.fixed.flicker_corner_frequency);
  opt("source_follower_current_modulation", m.fixed.source_follower_current_modulation);
  opt("source_follower_gain", m.fixed.source_follower_gain);
  return m;
}

CameraMetadata read_metadata(const KvText& kv, const std::string& prefix) {
  for (const auto& info : kMetaFields) {
    const std::string key = prefix + std::string(info.name);
    if (!kv.contains(key)) throw KvParseError("missing metadata field '" + key + "'");
  }
  return overlay_metadata(kv, CameraMetadata{}, prefix);
}

}  // namespace camnoise
