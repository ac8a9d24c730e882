#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace market::canonical {

using Json = nlohmann::json;

/// Canonical text form used for everything that gets hashed:
///   - UTF-8, no insignificant whitespace
///   - object keys sorted bytewise at every nesting level
///   - integral numbers printed as integers, other numbers in shortest
///     round-trip form ("2.5", not "2.50")
/// Non-finite numbers and invalid UTF-8 raise ValidationError.
std::string dump(const Json& value);

/// Parses JSON text, mapping parser errors to MalformedInput.
Json parse(std::string_view text);

}  // namespace market::canonical
