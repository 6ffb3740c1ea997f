import asyncio
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from logging.handlers import TimedRotatingFileHandler
from os import environ
from typing import Any, Callable, Mapping, Optional, Sequence, TypeVar, Union

import aiojobs
from dotenv import find_dotenv, load_dotenv

from .config import ConfigError, LoggerConfig, LoggerRotatingConfig, RunConfig, parse_config

T = TypeVar('T')


class Bridge:
    config_file: Optional[str]
    config: RunConfig

    def __init__(self, config: Optional[str] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> None:
        self.config_file = config
        self.config = self._load_config(overrides)
        self._load_logger(self.config.logger)

    def _load_config(self, overrides: Optional[Mapping[str, Any]]) -> RunConfig:
        if env := environ.get('ENV'):
            env_file = find_dotenv(f'.env.{env}', usecwd=True)
            if not load_dotenv(env_file):
                raise ConfigError([f'load dotenv file failed: .env.{env}'])
        else:
            load_dotenv(find_dotenv(usecwd=True))
        if self.config_file:
            if not os.path.exists(self.config_file):
                raise ConfigError([f'config file not found: {self.config_file}'])
            with open(self.config_file, encoding='utf-8') as f:
                text = f.read()
        else:
            text = ''
        logging.debug('config source: %s', self.config_file or '<defaults>')
        return parse_config(text, environ, overrides)

    def _load_logger(self, logger_conf: Optional[LoggerConfig]) -> None:
        if not logger_conf:
            return
        logger = logging.getLogger(logger_conf.name)
        logger.setLevel(logger_conf.level)
        formatter = logging.Formatter(logger_conf.format)
        if logger_conf.stream == 'file':
            rotating_conf = logger_conf.rotating or LoggerRotatingConfig()
            file_handler = TimedRotatingFileHandler(
                logger_conf.file or 'fracmem.log',
                when=rotating_conf.when,
                interval=rotating_conf.interval,
                backupCount=rotating_conf.backup_count
            )
            file_handler.suffix = rotating_conf.suffix
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        else:
            stream = sys.stdout if logger_conf.stream == 'stdout' else sys.stderr
            stream_handler = logging.StreamHandler(stream)
            stream_handler.setFormatter(formatter)
            logger.addHandler(stream_handler)

    async def gather(self, tasks: Sequence[Callable[[], T]]) -> list[Union[T, BaseException]]:
        """
        Runs blocking tasks on at most `jobs` worker threads; results keep the order of tasks.
        """
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.config.jobs) as executor:
            async def call(task: Callable[[], T]) -> T:
                return await loop.run_in_executor(executor, task)

            scheduler = aiojobs.Scheduler(limit=self.config.jobs, pending_limit=0)
            try:
                jobs = [await scheduler.spawn(call(task)) for task in tasks]
                results: list[Union[T, BaseException]] = []
                for job in jobs:
                    try:
                        results.append(await job.wait())
                    except Exception as e:
                        results.append(e)
            finally:
                await scheduler.close()
        return results

    def run_tasks(self, tasks: Sequence[Callable[[], T]]) -> list[Union[T, BaseException]]:
        if self.config.jobs == 1:
            results: list[Union[T, BaseException]] = []
            for task in tasks:
                try:
                    results.append(task())
                except Exception as e:
                    results.append(e)
            return results
        return asyncio.run(self.gather(tasks))
