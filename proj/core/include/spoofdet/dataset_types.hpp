#pragma once

#include <string>
#include <string_view>

namespace spoofdet {

// Class indices are fixed across the toolkit: logits column 1 and scores
// near 1 mean genuine, the positive class.
enum class Label : int { synthesized = 0, genuine = 1 };

inline const char* label_name(Label label) {
  return label == Label::genuine ? "genuine" : "synthesized";
}

// Case-insensitive "genuine"/"synthesized"; anything else is rejected by
// the caller (which knows the line number).
bool parse_label(std::string_view text, Label& out);

}  // namespace spoofdet
