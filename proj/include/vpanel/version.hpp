#pragma once

namespace vpanel {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr const char* kManifestSchema = "vpanel.manifest/1";

}  // namespace vpanel
