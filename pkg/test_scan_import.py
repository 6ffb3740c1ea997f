from fracmem.registry import SUITES, suite_checks

if __name__ == '__main__':
    for mode in SUITES:
        for check in suite_checks(mode):
            print(mode, check.name, check.tolerance)
