#include "market/canonical_json.hpp"

#include <charconv>
#include <cmath>

#include "market/error.hpp"

namespace market::canonical {

namespace {

void write_string(const std::string& s, std::string& out) {
  try {
    out += Json(s).dump(-1, ' ', false, Json::error_handler_t::strict);
  } catch (const Json::type_error&) {
    throw Error(ErrorCode::ValidationError, "string is not valid UTF-8");
  }
}

void write_number(double d, std::string& out) {
  if (!std::isfinite(d)) {
    throw Error(ErrorCode::ValidationError, "non-finite number");
  }
  // 2^53: every integral double below this prints exactly as an integer.
  if (d == std::trunc(d) && std::fabs(d) < 9007199254740992.0) {
    out += std::to_string(static_cast<long long>(d));
    return;
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  out.append(buf, res.ptr);
}

void write(const Json& v, std::string& out) {
  switch (v.type()) {
    case Json::value_t::null: out += "null"; break;
    case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; break;
    case Json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case Json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      break;
    case Json::value_t::number_float: write_number(v.get<double>(), out); break;
    case Json::value_t::string: write_string(v.get_ref<const std::string&>(), out); break;
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : v) {
        if (!first) out.push_back(',');
        first = false;
        write(item, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::object: {
      // object_t is an ordered std::map, so iteration is already bytewise
      // key order.
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out.push_back(',');
        first = false;
        write_string(key, out);
        out.push_back(':');
        write(item, out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::binary:
    case Json::value_t::discarded:
      throw Error(ErrorCode::ValidationError, "value has no JSON text form");
  }
}

}  // namespace

std::string dump(const Json& value) {
  std::string out;
  write(value, out);
  return out;
}

Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace market::canonical
