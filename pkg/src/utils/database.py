from functools import lru_cache

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker


@lru_cache(maxsize=None)
def get_engine(url: str) -> Engine:
    return create_engine(url, echo=False, pool_pre_ping=True)


@lru_cache(maxsize=None)
def session_factory(url: str) -> sessionmaker:
    return sessionmaker(bind=get_engine(url), expire_on_commit=False)
