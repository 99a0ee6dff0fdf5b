#pragma once

#include <string_view>

namespace dermflow::resources {

extern const std::string_view lesion_prompt;
extern const std::string_view condition_prompt;
extern const std::string_view xai_prompt;
extern const std::string_view condition_lexicon;

}  // namespace dermflow::resources
