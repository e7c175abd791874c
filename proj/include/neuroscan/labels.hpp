#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace neuroscan {

enum class Label : int { meningioma = 0, glioma = 1, pituitary = 2, no_tumor = 3 };

inline constexpr std::size_t kNumClasses = 4;

/// Fixed class order used by every probability vector and confusion matrix.
inline constexpr std::array<Label, kNumClasses> kClassOrder = {
    Label::meningioma, Label::glioma, Label::pituitary, Label::no_tumor};

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view name);
/// Throws ValidationError on unknown names.
Label label_from_string(std::string_view name);

inline constexpr std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }
inline constexpr bool is_tumor(Label label) { return label != Label::no_tumor; }

enum class Split : int { train = 0, val = 1, test = 2 };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

}  // namespace neuroscan
