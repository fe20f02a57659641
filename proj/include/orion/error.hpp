#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orion {

enum class Errc {
  // core
  unknown_mode,
  malformed_model_id,
  malformed_timecode,
  degenerate_crop,
  invalid_value,
  // artifact store
  empty_payload,
  payload_too_large,
  storage_full,
  not_found,
  bad_signature,
  expired,
  malformed_url,
  io_error,
  // registry
  duplicate_name,
  schema_shape,
  unknown_tool,
  registry_frozen,
  // fixtures
  not_a_scene,
  not_a_document,
  not_a_video,
  invalid_fixture,
  missing_refs,
  page_out_of_range,
  no_match,
  out_of_range,
  // planner / executor / reflector
  no_applicable_pattern,
  backend_unavailable,
  invalid_plan,
  unknown_hint,
  path_miss,
  unready_ref,
  judge_unavailable,
  // session
  unknown_session,
  // structured output
  unsupported_response_format,
  structured_output_failure,
  // eval
  too_few_evaluators,
  too_many_models,
  score_out_of_range,
  malformed_csv,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message) : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace orion
