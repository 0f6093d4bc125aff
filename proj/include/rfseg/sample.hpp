#pragma once

#include <optional>
#include <string>
#include <utility>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"

namespace rfseg {

/// Where a pair came from. Augmented pairs remember their source id so train
/// sets can be audited for test leakage.
struct Provenance {
  std::optional<std::string> source_id;  // empty for originals
  int variant = 0;

  bool is_augmented() const { return source_id.has_value(); }
  // Id of the original pair this one derives from.
  const std::string& root_id(const std::string& own_id) const { return source_id ? *source_id : own_id; }
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SamplePair {
  GrayImage image;
  LabelMask mask;
  std::string id;
  Provenance provenance;

  SamplePair() = default;
  SamplePair(GrayImage img, LabelMask m, std::string name, Provenance prov = {})
      : image(std::move(img)), mask(std::move(m)), id(std::move(name)), provenance(std::move(prov)) {
    validate();
  }

  void validate() const {
    if (image.width != mask.width || image.height != mask.height)
      throw Error(ErrorCode::DimensionMismatch, "image/mask dimensions differ for " + id);
  }

  const std::string& root_id() const { return provenance.root_id(id); }
};

}  // namespace rfseg
