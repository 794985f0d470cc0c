import os
import sys

ENVIRONMENTS = ("development", "production", "testing")

def choose_environment():
    """
    Ask which environment the CLI should run with.

    The menu goes to stderr so that exported CSV on stdout stays clean.
    """
    print("Choose the environment:", file=sys.stderr)
    for number, env in enumerate(ENVIRONMENTS, start=1):
        print(f"{number}. {env.capitalize()}", file=sys.stderr)

    choice = input("Enter the number of the environment: ").strip()
    if choice.isdigit() and 1 <= int(choice) <= len(ENVIRONMENTS):
        return ENVIRONMENTS[int(choice) - 1]
    print("Invalid choice. Defaulting to development.", file=sys.stderr)
    return "development"

if __name__ == "__main__":
    # Ask only when the caller did not pick one
    os.environ["ENV"] = os.getenv("ENV") or choose_environment()

    # Settings pick their env file from ENV at import time
    from multifield.cli.main import main

    sys.exit(main(sys.argv[1:]))
