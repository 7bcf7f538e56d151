import sys

import pkg_resources


def missing_requirements(lines):
    """Requirement specifiers from `lines` that the running interpreter does not satisfy."""
    installed = {pkg.key: pkg.version for pkg in pkg_resources.working_set}
    missing = []
    for line in lines:
        spec = line.split("#")[0].strip()
        if not spec:
            continue
        requirement = pkg_resources.Requirement.parse(spec)
        version = installed.get(requirement.key)
        if version is None or pkg_resources.parse_version(version) not in requirement.specifier:
            missing.append(str(requirement))
    return missing


def main():
    with open(sys.argv[1], "r", encoding="utf-8") as f:
        missing = missing_requirements(f.readlines())
    if missing:
        print("Missing packages: " + ", ".join(missing), file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
