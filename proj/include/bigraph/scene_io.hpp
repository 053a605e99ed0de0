#pragma once

#include <filesystem>

#include <json.hpp>

#include "bigraph/scene.hpp"

namespace bigraph {

using Json = nlohmann::json;

Json to_json(const Vec3d& v);
Vec3d vec3_from_json(const Json& j);

Json to_json(const Camera& camera);
Camera camera_from_json(const Json& j);

Json to_json(const Material& material);
Material material_from_json(const Json& j);

Json to_json(const ObjectInstance& object);
ObjectInstance object_from_json(const Json& j);

Json to_json(const Texture& texture);
Texture texture_from_json(const Json& j);

/// Full scene document. Missing optional fields take the struct defaults.
Json to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

Scene read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const Scene& scene);

}  // namespace bigraph
