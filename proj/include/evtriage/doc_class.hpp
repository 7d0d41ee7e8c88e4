#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace evtriage {

// Canonical order is load-bearing: argmax ties, confusion-matrix rows and
// report rows all use it.
enum class DocClass : std::size_t {
  kBroadSynthesis = 0,
  kSystematicReview = 1,
  kPrimaryRct = 2,
  kPrimaryNonRct = 3,
  kExcluded = 4,
};

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<DocClass, kNumClasses> kAllClasses = {
    DocClass::kBroadSynthesis, DocClass::kSystematicReview,
    DocClass::kPrimaryRct, DocClass::kPrimaryNonRct, DocClass::kExcluded};

constexpr std::size_t index_of(DocClass c) { return static_cast<std::size_t>(c); }
constexpr DocClass class_at(std::size_t i) { return static_cast<DocClass>(i); }

// snake_case wire name, e.g. "primary_non_rct".
std::string_view to_string(DocClass c);

// Human-readable row label used by the report renderer.
std::string_view display_name(DocClass c);

// Lowercases, trims, and treats runs of whitespace, '_' and '-' as a single
// separator before matching, so "Systematic Review", "systematic_review" and
// "primary non-rct" all resolve.
std::optional<DocClass> parse_doc_class(std::string_view label);

using ClassVector = std::array<double, kNumClasses>;

}  // namespace evtriage
